#include <algorithm>
#include <cmath>

#include "crane/evalharness.hpp"

namespace crane {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Joint vector with the free pendulum joints replaced by their hang
// equilibrium. Servoing on this pose keeps the swing state out of the control
// loop: the equilibrium grapple point is a rigid function of the four
// positioning joints, so the servo cannot pump the pendulum.
JointVector equilibrium_joints(const CraneModel& model, const JointVector& q) {
    const JointLimits& lim = model.limits();
    JointVector qe = q;
    qe[4] = std::clamp(kPi / 2.0 - (q[1] + q[2]), lim.min[4], lim.max[4]);
    qe[5] = std::clamp(kPi / 2.0, lim.min[5], lim.max[5]);
    return qe;
}

// Central-difference positional Jacobian of the equilibrium grapple point with
// respect to the slew, boom, stick, and telescope joints. The equilibrium tip
// angle follows the boom and stick, so their columns include that coupling.
Eigen::Matrix<double, 3, 4> position_jacobian(const CraneModel& model, const JointVector& q) {
    Eigen::Matrix<double, 3, 4> jac;
    const double h = 1e-5;
    for (int k = 0; k < 4; ++k) {
        JointVector qp = q, qm = q;
        qp[k] += h;
        qm[k] -= h;
        const Vec3 pp =
            model.forward_kinematics_unchecked(equilibrium_joints(model, qp)).p_C;
        const Vec3 pm =
            model.forward_kinematics_unchecked(equilibrium_joints(model, qm)).p_C;
        jac.col(k) = (pp - pm) / (2.0 * h);
    }
    return jac;
}

// Signed in-plane angle from the jaw hinge axis to the log axis, wrapped to
// (-pi/2, pi/2] — the grasp is symmetric under a half turn.
double yaw_error(const Vec3& e_Cx, const Vec3& e_l) {
    Vec3 ex = e_Cx;
    ex.z() = 0.0;
    const double n = ex.norm();
    if (n < 1e-9) return 0.0;
    ex /= n;
    double phi = std::atan2(ex.x() * e_l.y() - ex.y() * e_l.x(), ex.dot(e_l));
    if (phi > 0.5 * kPi) phi -= kPi;
    if (phi < -0.5 * kPi) phi += kPi;
    return phi;
}

Vec3 augmented_target(const LogSpec& log, const RewardConfig& reward) {
    Vec3 t = log.position;
    t.z() = log.position.z() - 0.5 * (reward.d_max_log - log.position.z());
    return t;
}

}  // namespace

void OracleController::on_reset(const GraspEnv& env) {
    (void)env;
    phase_ = Phase::Approach;
    v_cmd_.setZero();
}

ActionCommand OracleController::act(const Observation& obs, const GraspEnv& env) {
    (void)obs;  // scripted reference: reads the simulator ground truth
    const SimState& s = env.state();
    const CraneModel& model = env.simulator().model();
    const RewardConfig& reward = env.config().reward;
    const JointLimits& limits = model.limits();
    const double dt = env.dt_per_env_step();

    // Equilibrium (swing-free) grapple pose used by the servo and the gates.
    const JointVector q_eq = equilibrium_joints(model, s.q);
    const GrappleFrame g_eq = model.forward_kinematics_unchecked(q_eq);
    const Vec3 e_l = s.log.axis();
    const Vec3 v_rel = g_eq.p_C - s.log.position;
    const double axial = v_rel.dot(e_l);
    const double radial = (v_rel - axial * e_l).norm();
    const double width = model.jaw_opening_width(s.q[7]);
    const double phi = yaw_error(g_eq.e_Cx, e_l);

    // Phase transitions.
    switch (phase_) {
        case Phase::Approach:
            if (env.reached_proximity()) phase_ = Phase::Rise;
            break;
        case Phase::Rise:
            if (radial < std::max(0.18 * s.log.diameter, 0.05) && std::abs(phi) < 0.04) {
                phase_ = Phase::Close;
            }
            break;
        case Phase::Close:
            if (s.attached && s.q[7] >= 0.96 * model.q8_closed()) {
                phase_ = Phase::Lift;
            } else if (!s.attached && width <= s.log.diameter + 0.02 &&
                       radial > 0.6 * s.log.diameter) {
                phase_ = Phase::Rise;  // drifted off center while closing: back off
            }
            break;
        case Phase::Lift:
            if (s.attached && std::abs(s.log.position.z() - reward.lift_target) < 0.05) {
                phase_ = Phase::Hold;
            }
            break;
        case Phase::Hold:
            break;
    }

    // Cartesian target plus speed and acceleration caps per phase.
    Vec3 target = g_eq.p_C;
    double vmax = 0.5, amax = 1.2;
    switch (phase_) {
        case Phase::Approach:
            target = augmented_target(s.log, reward);
            vmax = 2.4;
            amax = 1.6;
            break;
        case Phase::Rise:
            target = s.log.position;
            vmax = 0.8;
            break;
        case Phase::Close:
            target = s.log.position;
            vmax = 0.5;
            break;
        case Phase::Lift:
        case Phase::Hold:
            target = g_eq.p_C + Vec3(0.0, 0.0, reward.lift_target - s.log.position.z());
            vmax = 0.8;
            break;
    }

    // Trapezoidal navigation profile: cruise, then brake inside the envelope
    // that half the acceleration budget can honour without overshoot (the
    // other half is margin for the velocity-tracking lag).
    const Vec3 err = target - g_eq.p_C;
    const double dist = err.norm();
    Vec3 v_nav = Vec3::Zero();
    if (dist > 1e-9) {
        const double speed =
            std::min({vmax, std::sqrt(amax * dist), 2.0 * dist});
        v_nav = err * (speed / dist);
    }

    // Acceleration-limited velocity command plus active swing damping: the
    // pivot accelerates along the instantaneous swing-plane axes in phase with
    // the swing rates, which drains pendulum energy far faster than the
    // passive damping alone.
    Vec3 dv = (v_nav - v_cmd_) / dt;
    const double dvn = dv.norm();
    if (dvn > amax) dv *= amax / dvn;
    const Mat3 r5 = model.frame(s.q, 5).rotation;
    const Vec3 normal = r5.col(2);
    Vec3 in_plane = normal.cross(Vec3::UnitZ());
    const double ipn = in_plane.norm();
    in_plane = ipn > 1e-9 ? Vec3(in_plane / ipn) : Vec3::Zero();
    const double k_damp = 1.5;
    const Vec3 accel = dv + k_damp * (s.qd5 * in_plane + s.qd6 * normal);
    v_cmd_ += accel * dt;
    const double vcn = v_cmd_.norm();
    if (vcn > 3.2) v_cmd_ *= 3.2 / vcn;

    // Damped least squares on the four positioning joints.
    const Eigen::Matrix<double, 3, 4> jac = position_jacobian(model, s.q);
    const double lambda = 0.1;
    Eigen::Matrix3d jjt = jac * jac.transpose();
    jjt.diagonal().array() += lambda * lambda;
    const Eigen::Vector4d qdot = jac.transpose() * jjt.ldlt().solve(v_cmd_);

    ActionCommand cmd;
    for (int k = 0; k < 4; ++k) {
        cmd.qd_A_d[k] = std::clamp(qdot[k], -0.95 * limits.max_speed[k],
                                   0.95 * limits.max_speed[k]);
    }

    // Rotator: servo the yaw error; the sign of dphi/dq7 is probed by a
    // finite difference so the servo is robust to the chain's conventions.
    {
        const double h = 1e-4;
        JointVector qp = q_eq;
        qp[6] += h;
        const double phi_p = yaw_error(model.forward_kinematics_unchecked(qp).e_Cx, e_l);
        const double dphi = (phi_p - phi) / h;
        const double direction = dphi >= 0.0 ? -1.0 : 1.0;
        cmd.qd_A_d[4] = std::clamp(direction * 4.0 * phi, -0.95 * limits.max_speed[4],
                                   0.95 * limits.max_speed[4]);
    }

    // Jaws: open on the way in, close hard from the grasp phase onward.
    const bool closing = phase_ == Phase::Close || phase_ == Phase::Lift ||
                         phase_ == Phase::Hold;
    cmd.qd_A_d[5] = closing ? limits.max_speed[5] : -limits.max_speed[5];
    return cmd;
}

}  // namespace crane
