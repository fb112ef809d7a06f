#include "crane/sim.hpp"

#include <cmath>
#include <ostream>

#include "crane/binio.hpp"

namespace crane {

namespace {
constexpr double kPi = 3.14159265358979323846;

Mat3 yaw_rotation(double yaw) {
    Mat3 r;
    const double c = std::cos(yaw), s = std::sin(yaw);
    r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
    return r;
}

void write_vec3(std::ostream& os, const Vec3& v) {
    binio::write_f64(os, v.x());
    binio::write_f64(os, v.y());
    binio::write_f64(os, v.z());
}

Vec3 read_vec3(std::istream& is) {
    Vec3 v;
    v.x() = binio::read_f64(is);
    v.y() = binio::read_f64(is);
    v.z() = binio::read_f64(is);
    return v;
}
}  // namespace

double angle_distance(const Vec3& e_Cx, const Vec3& e_ly) {
    const double d = 1.0 - std::abs(e_Cx.dot(e_ly));
    return std::min(std::max(d, 0.0), 1.0);
}

void SimState::serialize(std::ostream& os) const {
    for (int i = 0; i < kNumJoints; ++i) binio::write_f64(os, q[i]);
    for (int i = 0; i < kNumActuated; ++i) binio::write_f64(os, qd_A[i]);
    binio::write_f64(os, qd5);
    binio::write_f64(os, qd6);
    binio::write_f64(os, log.diameter);
    binio::write_f64(os, log.length);
    write_vec3(os, log.position);
    binio::write_f64(os, log.yaw);
    binio::write_f64(os, log.mass);
    binio::write_u8(os, attached ? 1 : 0);
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 3; ++r) binio::write_f64(os, log_in_grapple.rotation(r, c));
    write_vec3(os, log_in_grapple.translation);
    binio::write_f64(os, sim_time);
    write_vec3(os, pivot_prev_pos);
    write_vec3(os, pivot_prev_vel);
    binio::write_u8(os, pivot_history ? 1 : 0);
}

SimState SimState::deserialize(std::istream& is) {
    SimState s;
    for (int i = 0; i < kNumJoints; ++i) s.q[i] = binio::read_f64(is);
    for (int i = 0; i < kNumActuated; ++i) s.qd_A[i] = binio::read_f64(is);
    s.qd5 = binio::read_f64(is);
    s.qd6 = binio::read_f64(is);
    s.log.diameter = binio::read_f64(is);
    s.log.length = binio::read_f64(is);
    s.log.position = read_vec3(is);
    s.log.yaw = binio::read_f64(is);
    s.log.mass = binio::read_f64(is);
    s.attached = binio::read_u8(is) != 0;
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 3; ++r) s.log_in_grapple.rotation(r, c) = binio::read_f64(is);
    s.log_in_grapple.translation = read_vec3(is);
    s.sim_time = binio::read_f64(is);
    s.pivot_prev_pos = read_vec3(is);
    s.pivot_prev_vel = read_vec3(is);
    s.pivot_history = binio::read_u8(is) != 0;
    return s;
}

bool SimState::operator==(const SimState& o) const {
    return q == o.q && qd_A == o.qd_A && qd5 == o.qd5 && qd6 == o.qd6 &&
           log.diameter == o.log.diameter && log.length == o.log.length &&
           log.position == o.log.position && log.yaw == o.log.yaw && log.mass == o.log.mass &&
           attached == o.attached && log_in_grapple.rotation == o.log_in_grapple.rotation &&
           log_in_grapple.translation == o.log_in_grapple.translation &&
           sim_time == o.sim_time && pivot_prev_pos == o.pivot_prev_pos &&
           pivot_prev_vel == o.pivot_prev_vel && pivot_history == o.pivot_history;
}

void ScenarioConfig::validate() const {
    auto ordered = [](double lo, double hi) { return std::isfinite(lo) && std::isfinite(hi) && lo <= hi; };
    if (!ordered(slew_min, slew_max) || !ordered(bearing_min, bearing_max) ||
        !ordered(radius_min, radius_max) || !ordered(diameter_min, diameter_max) ||
        !ordered(yaw_min, yaw_max)) {
        throw ConfigError("scenario: empty or non-finite sampling region");
    }
    if (radius_min <= 0.0) throw ConfigError("scenario: radius_min must be positive");
    if (diameter_min < 0.05) throw ConfigError("scenario: implausibly small log diameter");
    if (log_length <= 0.0 || wood_density <= 0.0) {
        throw ConfigError("scenario: log_length and wood_density must be positive");
    }
}

double CraneSimulator::tip_equilibrium(const SimState& state) const {
    const double eq = kPi / 2.0 - (state.q[1] + state.q[2]);
    const JointLimits& lim = model_.limits();
    return std::min(std::max(eq, lim.min[4]), lim.max[4]);
}

SimState CraneSimulator::spawn_scenario(const ScenarioConfig& scenario, RngStream& rng) const {
    scenario.validate();
    SimState s;

    // Draw order is fixed; changing it would silently break reproducibility.
    const double diameter = rng.uniform(scenario.diameter_min, scenario.diameter_max);
    const double radius = rng.uniform(scenario.radius_min, scenario.radius_max);
    const double bearing = rng.uniform(scenario.bearing_min, scenario.bearing_max);
    const double yaw = rng.uniform(scenario.yaw_min, scenario.yaw_max);
    const double slew = rng.uniform(scenario.slew_min, scenario.slew_max);
    const double q7 = rng.uniform(-scenario.q7_jitter, scenario.q7_jitter);

    s.log.diameter = diameter;
    s.log.length = scenario.log_length;
    s.log.position = Vec3(radius * std::cos(bearing), radius * std::sin(bearing),
                          0.5 * diameter);
    s.log.yaw = yaw;
    const double r = 0.5 * diameter;
    s.log.mass = scenario.wood_density * kPi * r * r * scenario.log_length;

    s.q.setZero();
    s.q[0] = slew;
    s.q[1] = scenario.rest_q2;
    s.q[2] = scenario.rest_q3;
    s.q[3] = scenario.rest_q4;
    s.q[4] = tip_equilibrium(s);
    s.q[5] = tilt_equilibrium();
    s.q[6] = q7;
    s.q[7] = 0.0;  // jaws open

    const ClampResult cl = clamp_to_limits(s.q, model_.limits());
    s.q = cl.q;
    s.qd_A.setZero();
    s.qd5 = 0.0;
    s.qd6 = 0.0;
    s.attached = false;
    s.sim_time = 0.0;
    s.pivot_history = false;
    return s;
}

CraneSimulator::PendulumState CraneSimulator::pendulum_step(const SimState& state,
                                                            const Vec3& base_acceleration,
                                                            double dt) const {
    if (!(dt > 0.0)) throw InvalidArgument("pendulum_step: dt must be positive");
    const double g_over_l = cfg_.gravity / cfg_.pendulum_length;

    // Swing-plane directions: the tip joint's rotation axis (z of DH frame 5)
    // is the boom-plane normal; the in-plane horizontal tangent and the
    // normal itself pick up the pivot's lateral acceleration.
    const Mat3 r5 = model_.frame(state.q, 5).rotation;
    const Vec3 normal = r5.col(2);
    Vec3 in_plane = normal.cross(Vec3::UnitZ());
    const double n = in_plane.norm();
    in_plane = n > 1e-9 ? Vec3(in_plane / n) : Vec3::Zero();

    const double q5_eq = tip_equilibrium(state);
    const double q6_eq = tilt_equilibrium();

    const double acc5 = -g_over_l * std::sin(state.q[4] - q5_eq) -
                        cfg_.pendulum_damping * state.qd5 -
                        cfg_.pendulum_coupling * base_acceleration.dot(in_plane);
    const double acc6 = -g_over_l * std::sin(state.q[5] - q6_eq) -
                        cfg_.pendulum_damping * state.qd6 -
                        cfg_.pendulum_coupling * base_acceleration.dot(normal);

    PendulumState out;
    out.qd5 = state.qd5 + acc5 * dt;
    out.qd6 = state.qd6 + acc6 * dt;
    out.q5 = state.q[4] + out.qd5 * dt;
    out.q6 = state.q[5] + out.qd6 * dt;

    // Inelastic stop at the free joints' mechanical limits.
    const JointLimits& lim = model_.limits();
    if (out.q5 < lim.min[4]) { out.q5 = lim.min[4]; out.qd5 = 0.0; }
    if (out.q5 > lim.max[4]) { out.q5 = lim.max[4]; out.qd5 = 0.0; }
    if (out.q6 < lim.min[5]) { out.q6 = lim.min[5]; out.qd6 = 0.0; }
    if (out.q6 > lim.max[5]) { out.q6 = lim.max[5]; out.qd6 = 0.0; }
    return out;
}

void CraneSimulator::grasp_check(SimState& state) const {
    const GrappleFrame g = grapple_frame(state);
    const double width = model_.jaw_opening_width(state.q[7]);

    if (state.attached) {
        if (width > state.log.diameter) {
            // Re-opened past the log diameter: drop. The log settles straight
            // down onto the ground plane, keeping its horizontal pose.
            state.attached = false;
            state.log.position.z() = 0.5 * state.log.diameter;
        }
        return;
    }

    const Vec3 e_l = state.log.axis();
    const Vec3 v = g.p_C - state.log.position;
    const double axial = v.dot(e_l);
    const double radial = (v - axial * e_l).norm();
    const bool aligned = angle_distance(g.e_Cx, e_l) <= cfg_.align_tol;
    const bool in_sweep = std::abs(axial) <= 0.5 * state.log.length &&
                          radial < 0.5 * (width + state.log.diameter);

    if (in_sweep && radial <= 0.5 * width && aligned && width < state.log.diameter) {
        state.attached = true;
        PoseTransform log_pose;
        log_pose.rotation = yaw_rotation(state.log.yaw);
        log_pose.translation = state.log.position;
        state.log_in_grapple = g.pose().inverse() * log_pose;
        return;
    }

    // Jaw jam: uncaptured jaws cannot squeeze below the log's diameter while
    // the log sits in the sweep zone — off-center or misaligned jaws land on
    // the log and stop there instead of passing through it.
    if (in_sweep && width < state.log.diameter) {
        const double w_stop = std::min(state.log.diameter, model_.jaw_width_max());
        state.q[7] = model_.q8_closed() * (1.0 - w_stop / model_.jaw_width_max());
        state.qd_A[5] = 0.0;
    }
}

SimState CraneSimulator::step(const SimState& state, const ActuatedVector& desired_velocity,
                              double dt) const {
    if (!desired_velocity.allFinite()) throw InvalidArgument("step: non-finite velocity command");
    if (!(dt > 0.0)) throw InvalidArgument("step: dt must be positive");

    SimState next = state;
    const JointLimits& lim = model_.limits();

    // Velocity tracking: clip the command, then first-order lag toward it.
    ActuatedVector cmd = desired_velocity.cwiseMin(lim.max_speed).cwiseMax(-lim.max_speed);
    if (cfg_.velocity_tau > 0.0) {
        const double blend = std::exp(-dt / cfg_.velocity_tau);
        next.qd_A = cmd + blend * (state.qd_A - cmd);
    } else {
        next.qd_A = cmd;
    }
    next.qd_A = next.qd_A.cwiseMin(lim.max_speed).cwiseMax(-lim.max_speed);

    // Semi-implicit Euler on the actuated joints, then hard clamping; a
    // clamped joint sits at its stop with zero realized velocity.
    for (int k = 0; k < kNumActuated; ++k) {
        next.q[kActuatedIndex[k]] += next.qd_A[k] * dt;
    }
    const ClampResult cl = clamp_to_limits(next.q, lim);
    next.q = cl.q;
    for (int k = 0; k < kNumActuated; ++k) {
        if (cl.clamped[kActuatedIndex[k]]) next.qd_A[k] = 0.0;
    }

    // Pendulum pivot kinematics (depends only on q1..q4, just integrated).
    const Vec3 pivot = model_.frame(next.q, 5).translation;
    Vec3 pivot_acc = Vec3::Zero();
    Vec3 pivot_vel = Vec3::Zero();
    if (state.pivot_history) {
        pivot_vel = (pivot - state.pivot_prev_pos) / dt;
        pivot_acc = (pivot_vel - state.pivot_prev_vel) / dt;
    }
    const PendulumState p = pendulum_step(next, pivot_acc, dt);
    next.q[4] = p.q5;
    next.q[5] = p.q6;
    next.qd5 = p.qd5;
    next.qd6 = p.qd6;
    next.pivot_prev_pos = pivot;
    next.pivot_prev_vel = pivot_vel;
    next.pivot_history = true;

    // Carried log rides the grapple rigidly; yaw/height re-derived from the
    // composed pose (the stored grapple-relative pose never changes).
    if (next.attached) {
        const PoseTransform log_pose = grapple_frame(next).pose() * next.log_in_grapple;
        next.log.position = log_pose.translation;
        const Vec3 axis = log_pose.rotation.col(1);
        next.log.yaw = std::atan2(-axis.x(), axis.y());
    }

    grasp_check(next);
    next.sim_time = state.sim_time + dt;
    return next;
}

void write_trajectory_header(std::ostream& os) {
    os << "time,q1,q2,q3,q4,q5,q6,q7,q8,qd1,qd2,qd3,qd4,qd7,qd8,"
          "pC_x,pC_y,pC_z,log_x,log_y,log_z,log_yaw,attached\n";
}

void write_trajectory_row(std::ostream& os, const SimState& state, const GrappleFrame& g) {
    char buf[32];
    auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof(buf), "%.9g%c", v, sep);
        os << buf;
    };
    put(state.sim_time, ',');
    for (int i = 0; i < kNumJoints; ++i) put(state.q[i], ',');
    for (int i = 0; i < kNumActuated; ++i) put(state.qd_A[i], ',');
    put(g.p_C.x(), ',');
    put(g.p_C.y(), ',');
    put(g.p_C.z(), ',');
    put(state.log.position.x(), ',');
    put(state.log.position.y(), ',');
    put(state.log.position.z(), ',');
    put(state.log.yaw, ',');
    os << (state.attached ? 1 : 0) << '\n';
}

}  // namespace crane
