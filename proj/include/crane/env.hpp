#pragma once

#include <optional>

#include "crane/sim.hpp"

namespace crane {

inline constexpr int kObsDim = 18;

// Observation O = {q, qd_A, dp, dpsi}: joints, realized actuated velocities,
// augmented relative distance to the log, and the angle distance.
struct Observation {
    JointVector q = JointVector::Zero();
    ActuatedVector qd_A = ActuatedVector::Zero();
    Vec3 dp = Vec3::Zero();
    double dpsi = 0.0;

    Eigen::Matrix<double, kObsDim, 1> to_vector() const {
        Eigen::Matrix<double, kObsDim, 1> v;
        v.segment<8>(0) = q;
        v.segment<6>(8) = qd_A;
        v.segment<3>(14) = dp;
        v[17] = dpsi;
        return v;
    }
};

// Desired actuated joint velocities (physical units), bounded per joint.
struct ActionCommand {
    ActuatedVector qd_A_d = ActuatedVector::Zero();
};

struct RewardBreakdown {
    double r_distance = 0.0;
    double r_grapple = 0.0;
    double r_lift = 0.0;
    double r_balance = 0.0;
    double total = 0.0;
    double d_combine = 0.0;  // diagnostic, not part of the sum
};

struct RewardConfig {
    double omega1 = 0.5;    // weight of the angle distance in d_combine
    double omega2 = 2.0;    // distance-reward decay rate
    double omega3 = 1.0;    // lift-error decay rate
    double lift_target = 1.5;  // m, desired log height z_l,d
    double d_max_log = 0.8;    // m, largest log diameter (z-target augmentation)
    double q8_closed = 3.0;    // rad, fully closed jaw drive

    void validate() const {
        if (!(omega1 > 0.0 && omega2 > 0.0 && omega3 > 0.0)) {
            throw ConfigError("reward: omega1, omega2, omega3 must be positive");
        }
        if (!(q8_closed > 0.0)) throw ConfigError("reward: q8_closed must be positive");
    }
};

enum class TerminationReason : std::uint8_t {
    TimeLimit = 0,
    ProximityTimeout = 1,
    JointLimit = 2,
    LogOutOfRange = 3,
    VelocityLimit = 4,
    Success = 5,
};

const char* to_string(TerminationReason r);

struct TerminationConfig {
    double t_max = 9.0;              // s, hard episode cap
    double t_limit = 6.0;            // s, proximity deadline
    double proximity_epsilon = 0.2;  // combined-distance threshold
    double out_of_range = 8.0;       // m, grapple-to-log abort distance
    double lift_tolerance = 0.25;    // m, |z_l - lift_target| band for Success
    double q8_close_fraction = 0.95; // fraction of q8_closed counting as "fully grasped"
};

struct NoiseConfig {
    bool enabled = false;
    double epsilon_range = 0.1;  // both eps_p and eps_o ~ U(-range, range)
    double d_noise = 8.0;        // m, decay reference distance
};

// Augmented relative Cartesian distance: the target point is the log center
// shifted down by (d_max_log - z_l)/2 so the jaws wrap around the log.
Vec3 relative_distance(const GrappleFrame& grapple, const LogSpec& log, const RewardConfig& cfg);

// Unit vector along the log's length for a given yaw.
Vec3 log_axis_vector(double yaw);

// Shaped reward on the post-step state and the commanded velocities.
RewardBreakdown reward(const SimState& state, const GrappleFrame& grapple,
                       const ActionCommand& action, const RewardConfig& cfg);

// Measurement-error injection with quadratic decay toward the log.
// Draws one (eps_p, eps_o) pair per call.
void inject_pose_noise(Vec3& dp, double& dpsi, const NoiseConfig& noise, RngStream& rng);

// "Fully grasped and lifted": attached, jaws nearly closed, log inside the
// lift band. Shared by the environment's Success emission and the eval judge.
bool fully_grasped_lifted(const SimState& state, const RewardConfig& reward_cfg,
                          const TerminationConfig& term_cfg);

// Pure termination predicate. `reached_proximity` is the episode's latch:
// once d_combine has dipped below epsilon, ProximityTimeout is disarmed.
std::optional<TerminationReason> check_termination(const SimState& state, double t,
                                                   bool reached_proximity,
                                                   const CraneModel& model,
                                                   const RewardConfig& reward_cfg,
                                                   const TerminationConfig& term_cfg);

struct EnvConfig {
    ScenarioConfig scenario;
    RewardConfig reward;
    TerminationConfig termination;
    NoiseConfig noise;
    SimConfig sim;
    int action_repeat = 1;
};

// The latent-MDP grasping environment: one episode at a time, value-type
// state, deterministic given its seed stream.
class GraspEnv {
  public:
    GraspEnv(const CraneModel& model, const EnvConfig& cfg, RngStream rng)
        : sim_(model, cfg.sim), cfg_(cfg), rng_(rng) {
        if (cfg.action_repeat < 1) throw ConfigError("env: action_repeat must be >= 1");
        cfg_.reward.validate();
    }

    Observation reset();

    struct StepResult {
        Observation obs;
        RewardBreakdown reward;
        std::optional<TerminationReason> termination;
    };
    StepResult env_step(const ActionCommand& action);

    // Pure observation of a state (noise-free).
    Observation observe(const SimState& state) const;

    const SimState& state() const { return state_; }
    const CraneSimulator& simulator() const { return sim_; }
    const EnvConfig& config() const { return cfg_; }
    bool needs_reset() const { return needs_reset_; }
    bool reached_proximity() const { return reached_proximity_; }
    double dt_per_env_step() const { return cfg_.sim.dt * cfg_.action_repeat; }

    // Snapshot hooks for checkpointing.
    void serialize(std::ostream& os) const;
    void deserialize(std::istream& is);

  private:
    Observation make_observation(const SimState& state);

    CraneSimulator sim_;
    EnvConfig cfg_;
    RngStream rng_;
    SimState state_;
    bool needs_reset_ = true;
    bool reached_proximity_ = false;
};

// Network-input scaling: bounded joints to [-1, 1] by their ranges, the
// unbounded rotator by 1/pi, velocities by their caps, dp by the 8 m range.
Eigen::Matrix<double, kObsDim, 1> normalize_observation(const Observation& obs,
                                                        const JointLimits& limits);

}  // namespace crane
