#include "crane/evalharness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

namespace crane {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_hard_failure(TerminationReason r) {
    return r == TerminationReason::JointLimit || r == TerminationReason::VelocityLimit ||
           r == TerminationReason::LogOutOfRange;
}

FailureReason map_hard(TerminationReason r) {
    switch (r) {
        case TerminationReason::JointLimit: return FailureReason::JointLimit;
        case TerminationReason::VelocityLimit: return FailureReason::VelocityLimit;
        default: return FailureReason::OutOfRange;
    }
}
}  // namespace

const char* to_string(FailureReason r) {
    switch (r) {
        case FailureReason::Timeout: return "timeout";
        case FailureReason::CenterMiss: return "center_miss";
        case FailureReason::NeverReached: return "never_reached";
        case FailureReason::JointLimit: return "joint_limit";
        case FailureReason::OutOfRange: return "out_of_range";
        case FailureReason::VelocityLimit: return "velocity_limit";
    }
    return "unknown";
}

std::optional<double> DiameterStats::success_rate() const {
    if (trials == 0) return std::nullopt;
    return 100.0 * static_cast<double>(successes) / static_cast<double>(trials);
}

TrialResult run_trial(Controller& controller, GraspEnv& env, const SuccessCriteria& criteria,
                      std::ostream* trajectory) {
    TrialResult out;
    out.grasp_time = kNaN;
    out.miss_distance = kNaN;

    Observation obs = env.reset();
    controller.on_reset(env);

    if (trajectory) {
        write_trajectory_header(*trajectory);
        write_trajectory_row(*trajectory, env.state(), env.simulator().grapple_frame(env.state()));
    }

    bool grasped = false;
    double attach_miss = kNaN;  // |axial offset| of the attachment currently in force
    bool prev_attached = env.state().attached;
    const int max_steps =
        static_cast<int>(std::ceil(env.config().termination.t_max / env.dt_per_env_step())) + 8;

    for (int step = 0; step < max_steps; ++step) {
        const ActionCommand cmd = controller.act(obs, env);
        const GraspEnv::StepResult res = env.env_step(cmd);
        out.total_reward += res.reward.total;
        out.steps += 1;
        const SimState& s = env.state();

        if (trajectory) {
            write_trajectory_row(*trajectory, s, env.simulator().grapple_frame(s));
        }

        if (s.attached && !prev_attached) {
            const Vec3 v = env.simulator().grapple_frame(s).p_C - s.log.position;
            attach_miss = std::abs(v.dot(s.log.axis()));
        } else if (!s.attached && prev_attached) {
            attach_miss = kNaN;
        }
        prev_attached = s.attached;

        if (!grasped && s.attached &&
            fully_grasped_lifted(s, env.config().reward, env.config().termination) &&
            s.sim_time <= criteria.grasp_deadline + 1e-9) {
            grasped = true;
            out.grasp_time = s.sim_time;
            out.miss_distance = attach_miss;
        }

        obs = res.obs;
        if (res.termination.has_value()) {
            out.termination = res.termination;
            break;
        }
    }

    const bool reached = env.reached_proximity();
    const bool centered = grasped && std::isfinite(out.miss_distance) &&
                          out.miss_distance <= criteria.center_miss_threshold;
    const bool hard = out.termination.has_value() && is_hard_failure(*out.termination);

    if (!hard && reached && grasped && centered) {
        out.success = true;
        return out;
    }
    if (hard) {
        out.failure = map_hard(*out.termination);
    } else if (!reached) {
        out.failure = FailureReason::NeverReached;
    } else if (grasped && !centered) {
        out.failure = FailureReason::CenterMiss;
    } else {
        out.failure = FailureReason::Timeout;
    }
    return out;
}

EvalReport monte_carlo(Controller& controller, const CraneModel& model,
                       const EnvConfig& base_cfg, const std::vector<double>& diameters,
                       int trials, const SuccessCriteria& criteria, std::uint64_t seed,
                       const std::string& trajectory_dir) {
    if (trials < 0) throw InvalidArgument("monte_carlo: negative trial count");
    EvalReport report;
    RngStream master(seed);
    for (std::size_t di = 0; di < diameters.size(); ++di) {
        DiameterStats stats;
        stats.diameter = diameters[di];
        EnvConfig cfg = base_cfg;
        cfg.scenario.diameter_min = diameters[di];
        cfg.scenario.diameter_max = diameters[di];
        for (int j = 0; j < trials; ++j) {
            GraspEnv env(model, cfg,
                         master.child(static_cast<std::uint64_t>(di) * 1000003ULL +
                                      static_cast<std::uint64_t>(j)));
            std::ofstream traj;
            if (!trajectory_dir.empty()) {
                char name[96];
                std::snprintf(name, sizeof(name), "/d%.2f_trial%04d.csv", diameters[di], j);
                traj.open(trajectory_dir + name, std::ios::trunc);
                if (!traj) throw IoError("cannot write trajectory in " + trajectory_dir);
            }
            const TrialResult r =
                run_trial(controller, env, criteria, traj.is_open() ? &traj : nullptr);
            stats.trials += 1;
            if (r.success) {
                stats.successes += 1;
            } else if (r.failure.has_value()) {
                stats.failures[static_cast<std::size_t>(*r.failure)] += 1;
            }
        }
        report.total_trials += stats.trials;
        report.total_successes += stats.successes;
        report.rows.push_back(stats);
    }
    return report;
}

void write_eval_csv(const EvalReport& report, std::ostream& os) {
    os << "diameter,trials,successes,success_rate,timeout,center_miss,never_reached,"
          "joint_limit,out_of_range,velocity_limit\n";
    char buf[64];
    for (const DiameterStats& row : report.rows) {
        std::snprintf(buf, sizeof(buf), "%.9g,%d,%d,", row.diameter, row.trials, row.successes);
        os << buf;
        if (const auto rate = row.success_rate(); rate.has_value()) {
            std::snprintf(buf, sizeof(buf), "%.1f", *rate);
            os << buf;
        }
        for (int f = 0; f < kNumFailureReasons; ++f) {
            os << ',' << row.failures[static_cast<std::size_t>(f)];
        }
        os << '\n';
    }
}

void write_eval_text(const EvalReport& report, std::ostream& os) {
    os << "diameter  trials  success  rate     failures (timeout/center/reach/joint/range/vel)\n";
    char buf[160];
    for (const DiameterStats& row : report.rows) {
        char rate_str[16];
        if (const auto rate = row.success_rate(); rate.has_value()) {
            std::snprintf(rate_str, sizeof(rate_str), "%5.1f%%", *rate);
        } else {
            std::snprintf(rate_str, sizeof(rate_str), "   n/a");
        }
        std::snprintf(buf, sizeof(buf), "%7.2f m %6d %8d  %s   %d / %d / %d / %d / %d / %d\n",
                      row.diameter, row.trials, row.successes, rate_str, row.failures[0],
                      row.failures[1], row.failures[2], row.failures[3], row.failures[4],
                      row.failures[5]);
        os << buf;
    }
    const double total_rate = report.total_trials > 0
                                  ? 100.0 * report.total_successes / report.total_trials
                                  : 0.0;
    std::snprintf(buf, sizeof(buf), "overall: %d/%d (%.1f%%)\n", report.total_successes,
                  report.total_trials, total_rate);
    os << buf;
}

}  // namespace crane
