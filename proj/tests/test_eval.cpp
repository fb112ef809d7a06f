#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "crane/evalharness.hpp"
#include "crane/env.hpp"
#include "crane/errors.hpp"
#include "helpers.hpp"

using namespace crane;

namespace {

// Easy, fully pinned scene: log straight ahead of the rest pose, aligned yaw,
// no rotator jitter, fixed diameter.
EnvConfig servo_env_config() {
    EnvConfig cfg;
    cfg.scenario.slew_min = cfg.scenario.slew_max = -1.5707963267948966;
    cfg.scenario.bearing_min = cfg.scenario.bearing_max = -1.5707963267948966;
    cfg.scenario.radius_min = cfg.scenario.radius_max = 6.0;
    cfg.scenario.diameter_min = cfg.scenario.diameter_max = 0.5;
    cfg.scenario.yaw_min = cfg.scenario.yaw_max = -1.5707963267948966;
    cfg.scenario.rest_q2 = 0.95;
    cfg.scenario.rest_q3 = -0.16;
    cfg.scenario.rest_q4 = 1.2;
    cfg.scenario.q7_jitter = 0.0;
    cfg.noise.enabled = false;
    return cfg;
}

struct ZeroController : Controller {
    ActionCommand act(const Observation&, const GraspEnv&) override { return {}; }
};

// Minimal scripted grasping servo, written independently of the library's
// reference controller: resolved-rate Cartesian control of the first four
// joints through a finite-difference Jacobian, then close and lift. The
// `axial_offset` parameter shifts the aim point along the log axis, which
// lets tests force an off-center attachment on purpose.
class ServoController : public Controller {
public:
    explicit ServoController(double axial_offset) : offset_(axial_offset) {}

    void on_reset(const GraspEnv&) override { phase_ = 0; }

    ActionCommand act(const Observation&, const GraspEnv& env) override {
        const SimState& s = env.state();
        const CraneModel& model = env.simulator().model();
        const Vec3 p_C = env.simulator().grapple_frame(s).p_C;
        // Servo the hang point -- where the tip would sit if the pendulum were
        // at rest for the current boom angles -- not the swinging tip itself.
        // Chasing the instantaneous tip feeds the swing back into the joint
        // commands and locks the pendulum into a pursuit limit cycle.
        const auto hang = [&](const JointVector& q) {
            SimState probe = s;
            probe.q = q;
            probe.q[4] = env.simulator().tip_equilibrium(probe);
            probe.q[5] = CraneSimulator::tilt_equilibrium();
            return model.forward_kinematics_unchecked(probe.q).p_C;
        };
        const Vec3 p_hang = hang(s.q);
        const Vec3 axis = s.log.axis();
        const Vec3 center = s.log.position;
        const Vec3 aim = center + offset_ * axis;

        Vec3 target = aim;
        const double horiz =
            std::hypot(p_hang.x() - aim.x(), p_hang.y() - aim.y());
        if (phase_ == 0) {
            target.z() = aim.z() + 0.6;  // hover above the aim point first
            if (horiz < 0.06) phase_ = 1;
        } else if (phase_ == 1) {
            target.z() = aim.z();  // descend onto the log center line
            if (!s.attached && (p_hang - aim).norm() < 0.10) phase_ = 2;
            if (s.attached) phase_ = 3;
        } else if (phase_ == 2) {
            target.z() = aim.z();  // hold and close
            if (s.attached) phase_ = 3;
        } else {
            target = aim;
            target.z() = env.config().reward.lift_target;  // lift the catch
        }

        // Damped least-squares resolved rate on q1..q4, through the hang map
        // so the q5 equilibrium shift with the boom angles is accounted for.
        Eigen::Matrix<double, 3, 4> J;
        const double h = 1e-6;
        for (int j = 0; j < 4; ++j) {
            JointVector qp = s.q, qm = s.q;
            qp[j] += h;
            qm[j] -= h;
            J.col(j) = (hang(qp) - hang(qm)) / (2.0 * h);
        }
        Vec3 v = 1.8 * (target - p_hang);
        const double vmax = phase_ == 2 ? 0.35 : 0.8;
        if (v.norm() > vmax) v *= vmax / v.norm();
        const Eigen::Matrix3d JJt = J * J.transpose() + 1e-4 * Eigen::Matrix3d::Identity();
        const Eigen::Vector4d qd = J.transpose() * JJt.ldlt().solve(v);

        ActionCommand cmd;
        const ActuatedVector& vmax_j = model.limits().max_speed;
        for (int j = 0; j < 4; ++j) {
            cmd.qd_A_d[j] = std::clamp(qd[j], -vmax_j[j], vmax_j[j]);
        }
        cmd.qd_A_d[4] = 0.0;  // scenario spawns aligned; leave the rotator alone
        // Close only once the hang point sits on the aim point and the actual
        // tip has settled onto it; otherwise ease the jaws back open so a
        // partial jam can release.
        const bool settled =
            (p_hang - aim).norm() < 0.08 && (p_C - p_hang).norm() < 0.08;
        if (s.attached || (phase_ == 2 && settled)) {
            cmd.qd_A_d[5] = vmax_j[5];
        } else if (phase_ >= 2 && s.q[7] > 0.0) {
            cmd.qd_A_d[5] = -0.3;
        } else {
            cmd.qd_A_d[5] = 0.0;
        }
        return cmd;
    }

private:
    double offset_ = 0.0;
    int phase_ = 0;
};

}  // namespace

TEST_CASE("a motionless policy is judged never-reached at the proximity deadline") {
    const CraneModel model;
    EnvConfig cfg;  // default scenario: spawn is always outside the latch radius
    cfg.noise.enabled = false;
    GraspEnv env(model, cfg, RngStream(12));
    ZeroController zero;
    const TrialResult r = run_trial(zero, env, SuccessCriteria{});
    CHECK_FALSE(r.success);
    REQUIRE(r.failure.has_value());
    CHECK(*r.failure == FailureReason::NeverReached);
    REQUIRE(r.termination.has_value());
    CHECK(*r.termination == TerminationReason::ProximityTimeout);
    CHECK(r.steps == 1200);  // 6 s at 5 ms per env step
    CHECK(std::isnan(r.grasp_time));
    CHECK(std::isnan(r.miss_distance));
    CHECK(r.total_reward > 0.0);
    CHECK(std::isfinite(r.total_reward));
}

TEST_CASE("scripted center grasp is judged a success with small miss distance") {
    const CraneModel model;
    GraspEnv env(model, servo_env_config(), RngStream(31));
    ServoController servo(0.0);
    const TrialResult r = run_trial(servo, env, SuccessCriteria{});
    CHECK(r.success);
    CHECK_FALSE(r.failure.has_value());
    CHECK(r.grasp_time > 0.0);
    CHECK(r.grasp_time <= 9.0);
    CHECK(r.miss_distance <= 0.2);
    REQUIRE(r.termination.has_value());
    CHECK(*r.termination == TerminationReason::Success);
}

TEST_CASE("an off-center grasp-and-lift is judged center-miss, not success") {
    const CraneModel model;
    GraspEnv env(model, servo_env_config(), RngStream(31));
    ServoController servo(0.75);
    const TrialResult r = run_trial(servo, env, SuccessCriteria{});
    CHECK_FALSE(r.success);
    REQUIRE(r.failure.has_value());
    CHECK(*r.failure == FailureReason::CenterMiss);
    // The grasp itself completed; only the placement was off.
    CHECK(std::isfinite(r.grasp_time));
    CHECK(r.miss_distance > 0.5);
    CHECK(r.miss_distance == doctest::Approx(0.75).epsilon(0.25));
}

TEST_CASE("run_trial writes a trajectory with one row per simulator step") {
    const CraneModel model;
    EnvConfig cfg = servo_env_config();
    cfg.action_repeat = 4;
    GraspEnv env(model, cfg, RngStream(77));
    ZeroController zero;
    std::ostringstream traj;
    const TrialResult r = run_trial(zero, env, SuccessCriteria{}, &traj);
    std::istringstream is(traj.str());
    std::string line;
    REQUIRE(std::getline(is, line));
    CHECK(line.rfind("time,q1,", 0) == 0);
    int rows = 0;
    int cols_bad = 0;
    while (std::getline(is, line)) {
        ++rows;
        int commas = 0;
        for (char c : line) commas += (c == ',');
        if (commas != 22) ++cols_bad;
    }
    CHECK(rows == r.steps + 1);  // initial state plus one per env step
    CHECK(cols_bad == 0);
}

TEST_CASE("monte_carlo layout: one row per diameter, counters add up") {
    const CraneModel model;
    EnvConfig cfg;
    cfg.noise.enabled = false;
    ZeroController zero;
    const std::vector<double> diameters = {0.3, 0.55, 0.8};
    const EvalReport rep = monte_carlo(zero, model, cfg, diameters, 2, SuccessCriteria{}, 5);
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.total_trials == 6);
    for (std::size_t i = 0; i < diameters.size(); ++i) {
        const DiameterStats& row = rep.rows[i];
        CHECK(row.diameter == doctest::Approx(diameters[i]));
        CHECK(row.trials == 2);
        int fails = 0;
        for (int f = 0; f < kNumFailureReasons; ++f) fails += row.failures[f];
        CHECK(row.successes + fails == row.trials);
        REQUIRE(row.success_rate().has_value());
        CHECK(*row.success_rate() ==
              doctest::Approx(100.0 * row.successes / double(row.trials)));
    }
    CHECK_THROWS_AS(monte_carlo(zero, model, cfg, diameters, -1, SuccessCriteria{}, 5),
                    InvalidArgument);
}

TEST_CASE("monte_carlo with the same seed reproduces the report byte for byte") {
    const CraneModel model;
    EnvConfig cfg;
    cfg.noise.enabled = true;  // exercise the observation-noise path too
    ZeroController zero;
    const std::vector<double> diameters = {0.4, 0.6};
    std::ostringstream a, b;
    write_eval_csv(monte_carlo(zero, model, cfg, diameters, 3, SuccessCriteria{}, 99), a);
    write_eval_csv(monte_carlo(zero, model, cfg, diameters, 3, SuccessCriteria{}, 99), b);
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("diameter,trials,successes,success_rate,timeout,", 0) == 0);
}

TEST_CASE("empty evaluations render n/a rates instead of dividing by zero") {
    DiameterStats empty;
    empty.diameter = 0.5;
    CHECK_FALSE(empty.success_rate().has_value());

    EvalReport rep;
    rep.rows.push_back(empty);
    std::ostringstream csv, text;
    write_eval_csv(rep, csv);
    CHECK(csv.str().find("0.5,0,0,,0,0,0,0,0,0") != std::string::npos);
    write_eval_text(rep, text);
    CHECK(text.str().find("n/a") != std::string::npos);
    CHECK(text.str().find("overall: 0/0 (0.0%)") != std::string::npos);
}

TEST_CASE("monte_carlo writes per-trial trajectory files on request") {
    testutil::TempDir tmp("traj");
    const CraneModel model;
    EnvConfig cfg = servo_env_config();
    ZeroController zero;
    monte_carlo(zero, model, cfg, {0.5}, 2, SuccessCriteria{}, 7, tmp.str());
    CHECK(std::filesystem::exists(tmp.path() / "d0.50_trial0000.csv"));
    CHECK(std::filesystem::exists(tmp.path() / "d0.50_trial0001.csv"));
    const std::string body = testutil::read_file((tmp.path() / "d0.50_trial0000.csv").string());
    CHECK(body.rfind("time,q1,", 0) == 0);
}

TEST_CASE("reference controller completes an easy scene") {
    const CraneModel model;
    EnvConfig cfg = servo_env_config();
    cfg.scenario.radius_min = 5.9;
    cfg.scenario.radius_max = 6.3;
    cfg.scenario.yaw_min = -1.8;
    cfg.scenario.yaw_max = -1.3;
    cfg.scenario.q7_jitter = 0.3;
    OracleController oracle;
    GraspEnv env(model, cfg, RngStream(4242));
    const TrialResult r = run_trial(oracle, env, SuccessCriteria{});
    CHECK(r.success);
    CHECK(r.miss_distance <= 0.5);
}

TEST_CASE("failure reasons have stable names") {
    CHECK(std::string(to_string(FailureReason::Timeout)) == "timeout");
    CHECK(std::string(to_string(FailureReason::CenterMiss)) == "center_miss");
    CHECK(std::string(to_string(FailureReason::NeverReached)) == "never_reached");
    CHECK(std::string(to_string(FailureReason::JointLimit)) == "joint_limit");
    CHECK(std::string(to_string(FailureReason::OutOfRange)) == "out_of_range");
    CHECK(std::string(to_string(FailureReason::VelocityLimit)) == "velocity_limit");
}
