#include "crane/env.hpp"

#include <cmath>
#include <ostream>

#include "crane/binio.hpp"

namespace crane {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTimeTol = 1e-9;  // guards accumulated-dt comparisons
}  // namespace

const char* to_string(TerminationReason r) {
    switch (r) {
        case TerminationReason::TimeLimit: return "TimeLimit";
        case TerminationReason::ProximityTimeout: return "ProximityTimeout";
        case TerminationReason::JointLimit: return "JointLimit";
        case TerminationReason::LogOutOfRange: return "LogOutOfRange";
        case TerminationReason::VelocityLimit: return "VelocityLimit";
        case TerminationReason::Success: return "Success";
    }
    return "Unknown";
}

Vec3 relative_distance(const GrappleFrame& grapple, const LogSpec& log,
                       const RewardConfig& cfg) {
    const double z_l = log.position.z();
    const double d_off = 0.5 * (cfg.d_max_log - z_l);
    const Vec3 target(log.position.x(), log.position.y(), z_l - d_off);
    return target - grapple.p_C;
}

Vec3 log_axis_vector(double yaw) { return {-std::sin(yaw), std::cos(yaw), 0.0}; }

RewardBreakdown reward(const SimState& state, const GrappleFrame& grapple,
                       const ActionCommand& action, const RewardConfig& cfg) {
    RewardBreakdown out;
    const Vec3 dp = relative_distance(grapple, state.log, cfg);
    const double dpsi = angle_distance(grapple.e_Cx, log_axis_vector(state.log.yaw));
    out.d_combine = dp.norm() + cfg.omega1 * dpsi;
    out.r_distance = std::exp(-cfg.omega2 * out.d_combine);

    const double close = std::min(std::max(state.q[7] / cfg.q8_closed, 0.0), 1.0);
    out.r_grapple = out.r_distance * close + (1.0 - close) * (1.0 - out.r_distance);

    const double lift_err = std::abs(state.log.position.z() - cfg.lift_target);
    out.r_lift = (1.0 - std::tanh(cfg.omega3 * lift_err)) * (1.0 - out.r_grapple);

    out.r_balance = (1.0 - std::tanh(action.qd_A_d.norm())) * (1.0 - out.r_lift);

    out.total = out.r_distance + out.r_grapple + out.r_lift + out.r_balance;
    return out;
}

void inject_pose_noise(Vec3& dp, double& dpsi, const NoiseConfig& noise, RngStream& rng) {
    const double ratio = dp.norm() / noise.d_noise;
    const double s = ratio * ratio;
    const double eps_p = rng.uniform(-noise.epsilon_range, noise.epsilon_range);
    const double eps_o = rng.uniform(-noise.epsilon_range, noise.epsilon_range);
    dp += eps_p * dp * s;
    dpsi = std::min(std::max(dpsi + eps_o * dpsi * s, 0.0), 1.0);
}

bool fully_grasped_lifted(const SimState& state, const RewardConfig& reward_cfg,
                          const TerminationConfig& term_cfg) {
    if (!state.attached) return false;
    if (state.q[7] < term_cfg.q8_close_fraction * reward_cfg.q8_closed) return false;
    return std::abs(state.log.position.z() - reward_cfg.lift_target) <= term_cfg.lift_tolerance;
}

std::optional<TerminationReason> check_termination(const SimState& state, double t,
                                                   bool reached_proximity,
                                                   const CraneModel& model,
                                                   const RewardConfig& reward_cfg,
                                                   const TerminationConfig& term_cfg) {
    constexpr double joint_tol = 1e-9;
    const JointLimits& lim = model.limits();
    for (int i = 0; i < kNumJoints; ++i) {
        if (!lim.bounded(i)) continue;
        if (state.q[i] < lim.min[i] - joint_tol || state.q[i] > lim.max[i] + joint_tol) {
            return TerminationReason::JointLimit;
        }
    }
    for (int k = 0; k < kNumActuated; ++k) {
        if (std::abs(state.qd_A[k]) > lim.max_speed[k] + joint_tol) {
            return TerminationReason::VelocityLimit;
        }
    }
    const GrappleFrame g = model.forward_kinematics_unchecked(state.q);
    if ((g.p_C - state.log.position).norm() > term_cfg.out_of_range) {
        return TerminationReason::LogOutOfRange;
    }
    if (!reached_proximity && t + kTimeTol >= term_cfg.t_limit) {
        return TerminationReason::ProximityTimeout;
    }
    if (t + kTimeTol >= term_cfg.t_max) {
        return fully_grasped_lifted(state, reward_cfg, term_cfg)
                   ? TerminationReason::Success
                   : TerminationReason::TimeLimit;
    }
    return std::nullopt;
}

Observation GraspEnv::observe(const SimState& state) const {
    Observation obs;
    obs.q = state.q;
    obs.qd_A = state.qd_A;
    const GrappleFrame g = sim_.grapple_frame(state);
    obs.dp = relative_distance(g, state.log, cfg_.reward);
    obs.dpsi = angle_distance(g.e_Cx, log_axis_vector(state.log.yaw));
    return obs;
}

Observation GraspEnv::make_observation(const SimState& state) {
    Observation obs = observe(state);
    if (cfg_.noise.enabled) {
        inject_pose_noise(obs.dp, obs.dpsi, cfg_.noise, rng_);
    }
    return obs;
}

Observation GraspEnv::reset() {
    state_ = sim_.spawn_scenario(cfg_.scenario, rng_);
    needs_reset_ = false;
    reached_proximity_ = false;
    return make_observation(state_);
}

GraspEnv::StepResult GraspEnv::env_step(const ActionCommand& action) {
    if (needs_reset_) throw ProtocolError("env_step called on a terminated episode; reset first");

    for (int i = 0; i < cfg_.action_repeat; ++i) {
        state_ = sim_.step(state_, action.qd_A_d);
    }

    StepResult out;
    const GrappleFrame g = sim_.grapple_frame(state_);
    out.reward = reward(state_, g, action, cfg_.reward);

    if (out.reward.d_combine < cfg_.termination.proximity_epsilon) reached_proximity_ = true;

    out.termination = check_termination(state_, state_.sim_time, reached_proximity_,
                                        sim_.model(), cfg_.reward, cfg_.termination);
    if (out.termination) needs_reset_ = true;

    out.obs = make_observation(state_);
    return out;
}

void GraspEnv::serialize(std::ostream& os) const {
    state_.serialize(os);
    binio::write_u8(os, needs_reset_ ? 1 : 0);
    binio::write_u8(os, reached_proximity_ ? 1 : 0);
    binio::write_string(os, rng_.serialize_string());
}

void GraspEnv::deserialize(std::istream& is) {
    state_ = SimState::deserialize(is);
    needs_reset_ = binio::read_u8(is) != 0;
    reached_proximity_ = binio::read_u8(is) != 0;
    rng_.deserialize_string(binio::read_string(is));
}

Eigen::Matrix<double, kObsDim, 1> normalize_observation(const Observation& obs,
                                                        const JointLimits& limits) {
    Eigen::Matrix<double, kObsDim, 1> v;
    for (int i = 0; i < kNumJoints; ++i) {
        if (limits.bounded(i)) {
            const double mid = 0.5 * (limits.min[i] + limits.max[i]);
            const double half = 0.5 * (limits.max[i] - limits.min[i]);
            v[i] = (obs.q[i] - mid) / half;
        } else {
            v[i] = obs.q[i] / kPi;
        }
    }
    for (int k = 0; k < kNumActuated; ++k) {
        v[8 + k] = obs.qd_A[k] / limits.max_speed[k];
    }
    v.segment<3>(14) = obs.dp / 8.0;
    v[17] = obs.dpsi;
    return v;
}

}  // namespace crane
