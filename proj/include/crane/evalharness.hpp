#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "crane/env.hpp"

namespace crane {

enum class FailureReason : std::uint8_t {
    Timeout = 0,       // reached the log but never completed the grasp in time
    CenterMiss = 1,    // grasped too far from the log's midpoint
    NeverReached = 2,  // proximity gate never latched
    JointLimit = 3,
    OutOfRange = 4,
    VelocityLimit = 5,
};
constexpr int kNumFailureReasons = 6;
const char* to_string(FailureReason r);

struct SuccessCriteria {
    double reach_deadline = 6.0;        // s, proximity gate must latch by here
    double grasp_deadline = 9.0;        // s, full grasp-and-lift must occur by here
    double center_miss_threshold = 0.5; // m, |axial offset| allowed at attachment
};

struct TrialResult {
    bool success = false;
    std::optional<FailureReason> failure;
    double grasp_time = 0.0;     // s, first full grasp-and-lift (NaN if never)
    double miss_distance = 0.0;  // m, |axial offset| at the attachment in force then (NaN if never attached)
    double total_reward = 0.0;   // summed over env steps
    int steps = 0;               // env steps executed
    std::optional<TerminationReason> termination;
};

// A closed-loop controller under evaluation. `act` sees the (possibly noisy)
// observation plus the environment handle; scripted controllers may read the
// simulator ground truth through it.
class Controller {
public:
    virtual ~Controller() = default;
    virtual void on_reset(const GraspEnv& env) { (void)env; }
    virtual ActionCommand act(const Observation& obs, const GraspEnv& env) = 0;
};

// Runs one episode (env.reset() included) and judges it. If `trajectory` is
// given, one CSV row per simulator state is written (header included).
TrialResult run_trial(Controller& controller, GraspEnv& env, const SuccessCriteria& criteria,
                      std::ostream* trajectory = nullptr);

struct DiameterStats {
    double diameter = 0.0;
    int trials = 0;
    int successes = 0;
    std::array<int, kNumFailureReasons> failures{};

    // Percent; empty optional when no trials ran.
    std::optional<double> success_rate() const;
};

struct EvalReport {
    std::vector<DiameterStats> rows;
    int total_trials = 0;
    int total_successes = 0;
};

// Monte Carlo evaluation: `trials` episodes per diameter, each on an
// independent child stream of `seed`, so any (diameter, trial) pair is
// reproducible in isolation. When `trajectory_dir` is non-empty, one CSV of
// simulator states per trial is written there.
EvalReport monte_carlo(Controller& controller, const CraneModel& model,
                       const EnvConfig& base_cfg, const std::vector<double>& diameters,
                       int trials, const SuccessCriteria& criteria, std::uint64_t seed,
                       const std::string& trajectory_dir = "");

void write_eval_csv(const EvalReport& report, std::ostream& os);
void write_eval_text(const EvalReport& report, std::ostream& os);

// Scripted reference controller: resolved-rate Cartesian servo on the slew,
// boom, stick, and telescope, a yaw servo on the rotator, active swing
// damping, and a phase machine (approach the proximity point, rise to grasp
// height, close, lift).
class OracleController : public Controller {
public:
    void on_reset(const GraspEnv& env) override;
    ActionCommand act(const Observation& obs, const GraspEnv& env) override;

private:
    enum class Phase { Approach, Rise, Close, Lift, Hold };
    Phase phase_ = Phase::Approach;
    Vec3 v_cmd_ = Vec3::Zero();  // acceleration-limited Cartesian command
};

}  // namespace crane
