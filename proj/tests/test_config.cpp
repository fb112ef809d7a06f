#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "crane/config.hpp"
#include "crane/errors.hpp"
#include "helpers.hpp"

using namespace crane;
namespace fs = std::filesystem;

namespace {

std::string contains_msg(const CraneError& e) { return e.what(); }

// Runs the installed command-line binary with the given arguments, capturing
// combined stdout/stderr. Returns the process exit code.
struct CliResult {
    int code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args, const testutil::TempDir& scratch,
                  const std::string& tag) {
    const std::string out_path = (scratch.path() / ("cli_" + tag + ".out")).string();
    const std::string cmd = std::string(CRANE_RL_BIN) + " " + args + " > " + out_path + " 2>&1";
    const int status = std::system(cmd.c_str());
    CliResult r;
    if (status == -1) {
        r.code = -1;
    } else if (WIFEXITED(status)) {
        r.code = WEXITSTATUS(status);
    } else {
        r.code = 128;
    }
    r.output = testutil::read_file(out_path);
    return r;
}

// A scenario that spawns the log a fixed short reach straight ahead of the
// rest pose, so scripted-controller evaluations finish quickly and reliably.
std::string easy_scene_json() {
    return R"({
      "scenario": {
        "slew_min": -1.5707963267948966, "slew_max": -1.5707963267948966,
        "bearing_min": -1.5707963267948966, "bearing_max": -1.5707963267948966,
        "radius_min": 6.0, "radius_max": 6.2,
        "diameter_min": 0.5, "diameter_max": 0.5,
        "yaw_min": -1.5707963267948966, "yaw_max": -1.5707963267948966,
        "rest_q2": 0.95, "rest_q3": -0.16, "rest_q4": 1.2,
        "q7_jitter": 0.0
      },
      "noise": {"enabled": false}
    })";
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig parsing
// ---------------------------------------------------------------------------

TEST_CASE("a default config carries the documented defaults") {
    const RunConfig cfg;
    CHECK(cfg.seed == 1);
    CHECK(cfg.paths.log_dir == "runs/default/logs");
    CHECK(cfg.paths.checkpoint_dir == "runs/default/checkpoints");
    CHECK(cfg.grapple_offset == 0.3);
    CHECK(cfg.jaw_width_max == 1.6);
    CHECK(cfg.action_repeat == 4);
    CHECK(cfg.train.total_steps == 500000000ULL);
    CHECK(cfg.train.n_envs == 42);
    CHECK(cfg.train.rollout_len == 1000);
    CHECK(cfg.train.minibatch_size == 4096);
    CHECK(cfg.train.distribution_kind == DistributionKind::Beta);
    CHECK(cfg.train.rpo_enabled);
    CHECK(cfg.eval.trials_per_diameter == 20);
    REQUIRE(cfg.eval.diameters.size() == 6);
    CHECK(cfg.eval.diameters.front() == 0.3);
    CHECK(cfg.eval.diameters.back() == 0.8);
    CHECK(cfg.eval.criteria.center_miss_threshold == 0.5);
}

TEST_CASE("an empty JSON object and a partial override both parse") {
    const RunConfig base = RunConfig::from_json_string("{}");
    CHECK(base.seed == 1);
    CHECK(base.train.n_envs == 42);

    const RunConfig part =
        RunConfig::from_json_string(R"({"train": {"n_envs": 3}, "seed": 42})");
    CHECK(part.seed == 42);
    CHECK(part.train.n_envs == 3);
    // untouched fields keep their defaults
    CHECK(part.train.rollout_len == 1000);
    CHECK(part.action_repeat == 4);
    CHECK(part.scenario.radius_min == base.scenario.radius_min);
}

TEST_CASE("a config survives a serialize/parse round trip exactly") {
    RunConfig cfg;
    cfg.seed = 9001;
    cfg.paths.log_dir = "x/logs";
    cfg.paths.checkpoint_dir = "x/ckpt";
    cfg.grapple_offset = 0.25;
    cfg.jaw_width_max = 1.9;
    cfg.max_speed = {0.9, 0.7, 0.65, 1.25, 1.75, 2.5};
    cfg.sim.dt = 0.004;
    cfg.sim.pendulum_length = 0.77;
    cfg.scenario.radius_min = 4.123456789012345;
    cfg.scenario.yaw_max = 2.25;
    cfg.scenario.q7_jitter = 0.125;
    cfg.reward.omega1 = 0.35;
    cfg.reward.lift_target = 1.75;
    cfg.termination.t_max = 11.5;
    cfg.termination.q8_close_fraction = 0.875;
    cfg.noise.enabled = true;
    cfg.noise.epsilon_range = 0.075;
    cfg.action_repeat = 2;
    cfg.train.total_steps = 123456;
    cfg.train.learning_rate = 1.5e-4;
    cfg.train.distribution_kind = DistributionKind::Gaussian;
    cfg.train.rpo_enabled = false;
    cfg.train.hidden_size = 96;
    cfg.eval.trials_per_diameter = 7;
    cfg.eval.diameters = {0.45, 0.55};
    cfg.eval.criteria.center_miss_threshold = 0.4;

    const RunConfig back = RunConfig::from_json_string(cfg.to_json_string());
    CHECK(back.seed == cfg.seed);
    CHECK(back.paths.log_dir == cfg.paths.log_dir);
    CHECK(back.paths.checkpoint_dir == cfg.paths.checkpoint_dir);
    CHECK(back.grapple_offset == cfg.grapple_offset);
    CHECK(back.jaw_width_max == cfg.jaw_width_max);
    for (int i = 0; i < 6; ++i) {
        CHECK(back.max_speed[static_cast<std::size_t>(i)] ==
              cfg.max_speed[static_cast<std::size_t>(i)]);
    }
    CHECK(back.sim.dt == cfg.sim.dt);
    CHECK(back.sim.pendulum_length == cfg.sim.pendulum_length);
    CHECK(back.scenario.radius_min == cfg.scenario.radius_min);
    CHECK(back.scenario.yaw_max == cfg.scenario.yaw_max);
    CHECK(back.scenario.q7_jitter == cfg.scenario.q7_jitter);
    CHECK(back.reward.omega1 == cfg.reward.omega1);
    CHECK(back.reward.lift_target == cfg.reward.lift_target);
    CHECK(back.termination.t_max == cfg.termination.t_max);
    CHECK(back.termination.q8_close_fraction == cfg.termination.q8_close_fraction);
    CHECK(back.noise.enabled == cfg.noise.enabled);
    CHECK(back.noise.epsilon_range == cfg.noise.epsilon_range);
    CHECK(back.action_repeat == cfg.action_repeat);
    CHECK(back.train.total_steps == cfg.train.total_steps);
    CHECK(back.train.learning_rate == cfg.train.learning_rate);
    CHECK(back.train.distribution_kind == DistributionKind::Gaussian);
    CHECK_FALSE(back.train.rpo_enabled);
    CHECK(back.train.hidden_size == cfg.train.hidden_size);
    CHECK(back.eval.trials_per_diameter == cfg.eval.trials_per_diameter);
    REQUIRE(back.eval.diameters.size() == 2);
    CHECK(back.eval.diameters[0] == 0.45);
    CHECK(back.eval.diameters[1] == 0.55);
    CHECK(back.eval.criteria.center_miss_threshold == 0.4);
}

TEST_CASE("unknown keys are rejected with their full path") {
    CHECK_THROWS_AS(RunConfig::from_json_string(R"({"banana": 1})"), ConfigError);
    try {
        RunConfig::from_json_string(R"({"train": {"lr": 0.001}})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(contains_msg(e).find("train.lr") != std::string::npos);
    }
    try {
        RunConfig::from_json_string(R"({"scenario": {"radius": 5}})");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(contains_msg(e).find("scenario.radius") != std::string::npos);
    }
}

TEST_CASE("malformed documents and values raise config errors") {
    CHECK_THROWS_AS(RunConfig::from_json_string("not json"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json_string("[1,2,3]"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json_string(R"({"seed": "abc"})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json_string(R"({"sim": 5})"), ConfigError);
    CHECK_THROWS_AS(
        RunConfig::from_json_string(R"({"kinematics": {"max_speed": [1, 2, 3]}})"),
        ConfigError);
    CHECK_THROWS_AS(
        RunConfig::from_json_string(R"({"train": {"distribution": "cauchy"}})"),
        ConfigError);
    // Valid enum spellings parse.
    CHECK(RunConfig::from_json_string(R"({"train": {"distribution": "gaussian"}})")
              .train.distribution_kind == DistributionKind::Gaussian);
    CHECK(RunConfig::from_json_string(R"({"train": {"distribution": "beta"}})")
              .train.distribution_kind == DistributionKind::Beta);
}

TEST_CASE("save then load reproduces the config; a missing file is an i/o error") {
    testutil::TempDir tmp("config_io");
    RunConfig cfg;
    cfg.seed = 77;
    cfg.train.n_envs = 5;
    const std::string path = (tmp.path() / "run.json").string();
    cfg.save(path);
    const RunConfig back = RunConfig::load(path);
    CHECK(back.seed == 77);
    CHECK(back.train.n_envs == 5);
    CHECK_THROWS_AS(RunConfig::load((tmp.path() / "missing.json").string()), IoError);
}

TEST_CASE("derived configs inherit the right fields") {
    RunConfig cfg;
    cfg.seed = 1234;
    cfg.grapple_offset = 0.35;
    cfg.jaw_width_max = 2.0;
    cfg.max_speed = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
    cfg.action_repeat = 3;
    cfg.scenario.radius_max = 7.25;
    cfg.noise.enabled = true;
    cfg.train.seed = 999;  // overridden by the top-level seed

    const CraneModel model = cfg.make_model();
    CHECK(model.grapple_offset() == 0.35);
    CHECK(model.jaw_width_max() == 2.0);
    for (int i = 0; i < kNumActuated; ++i) CHECK(model.limits().max_speed[i] == 0.5);

    const EnvConfig env = cfg.make_env_config();
    CHECK(env.action_repeat == 3);
    CHECK(env.scenario.radius_max == 7.25);
    CHECK(env.noise.enabled);
    CHECK(env.reward.q8_closed == model.q8_closed());

    const TrainConfig train = cfg.make_train_config();
    CHECK(train.seed == 1234);
}

// ---------------------------------------------------------------------------
// Command-line front end (subprocess smoke tests)
// ---------------------------------------------------------------------------

TEST_CASE("cli: usage and configuration errors exit 1") {
    testutil::TempDir tmp("cli_usage");
    CHECK(run_cli("frobnicate", tmp, "badsub").code == 1);
    CHECK(run_cli("train --no-such-flag", tmp, "badflag").code == 1);
    CHECK(run_cli("inspect", tmp, "noargs").code == 1);  // needs --checkpoint or --show-config

    const std::string bad = (tmp.path() / "bad.json").string();
    std::ofstream(bad) << R"({"train": {"banana": 1}})";
    const CliResult r = run_cli("inspect --show-config --config " + bad, tmp, "badcfg");
    CHECK(r.code == 1);
    CHECK(r.output.find("train.banana") != std::string::npos);

    // eval without a policy or scripted controller choice
    const CliResult e = run_cli("eval --controller oracle --policy ''", tmp, "brokeneval");
    (void)e;  // CLI11 may reject the empty value; either way it must not crash
}

TEST_CASE("cli: a missing config file exits 3") {
    testutil::TempDir tmp("cli_io");
    const CliResult r =
        run_cli("inspect --show-config --config /nonexistent/nope.json", tmp, "noconfig");
    CHECK(r.code == 3);
    const CliResult c = run_cli("emit-curves --metrics /nonexistent/m.jsonl", tmp, "nocurves");
    CHECK(c.code == 3);
}

TEST_CASE("cli: show-config round trips through the parser") {
    testutil::TempDir tmp("cli_show");
    const CliResult r = run_cli("inspect --show-config --seed 31337", tmp, "show");
    REQUIRE(r.code == 0);
    const RunConfig cfg = RunConfig::from_json_string(r.output);
    CHECK(cfg.seed == 31337);
}

TEST_CASE("cli: train, inspect, eval, and emit-curves work end to end") {
    testutil::TempDir tmp("cli_e2e");
    const std::string logs = (tmp.path() / "logs").string();
    const std::string ckpts = (tmp.path() / "ckpts").string();
    const std::string common = " --paths.log_dir " + logs + " --paths.checkpoint_dir " +
                               ckpts +
                               " --train.total_steps 64 --train.n_envs 2"
                               " --train.rollout_len 16 --train.minibatch_size 32"
                               " --train.epochs_per_update 2 --train.hidden_size 16"
                               " --train.hidden_depth 1 --seed 7";

    const CliResult train = run_cli("train" + common, tmp, "train");
    REQUIRE(train.code == 0);
    CHECK(train.output.find("training complete: 2 updates") != std::string::npos);
    CHECK(fs::exists(logs + "/metrics.jsonl"));
    CHECK(fs::exists(logs + "/effective_config.json"));
    CHECK(fs::exists(ckpts + "/final.ckpt"));
    {
        std::ifstream is(logs + "/metrics.jsonl");
        std::string line;
        int lines = 0;
        while (std::getline(is, line)) {
            if (!line.empty()) ++lines;
        }
        CHECK(lines == 2);
    }

    const CliResult ins = run_cli("inspect --checkpoint " + ckpts + "/final.ckpt", tmp, "ins");
    REQUIRE(ins.code == 0);
    CHECK(ins.output.find("distribution: beta") != std::string::npos);
    CHECK(ins.output.find("robust perturbation: on") != std::string::npos);
    CHECK(ins.output.find("envs: 2  rollout: 16") != std::string::npos);
    CHECK(ins.output.find("content hash:") != std::string::npos);

    // Evaluate the fresh policy on two short scenes; identical invocations
    // must produce byte-identical tables.
    const std::string scene = (tmp.path() / "scene.json").string();
    std::ofstream(scene) << easy_scene_json();
    const std::string eval_common =
        "eval --config " + scene + " --paths.log_dir " + logs +
        " --train.n_envs 2 --train.rollout_len 16 --train.hidden_size 16"
        " --train.hidden_depth 1 --eval.trials_per_diameter 2 --eval.diameters 0.5"
        " --seed 99 --policy " +
        ckpts + "/final.ckpt";
    const std::string csv_a = (tmp.path() / "eval_a.csv").string();
    const std::string csv_b = (tmp.path() / "eval_b.csv").string();
    const CliResult ev_a = run_cli(eval_common + " --out " + csv_a, tmp, "eva");
    REQUIRE(ev_a.code == 0);
    const CliResult ev_b = run_cli(eval_common + " --out " + csv_b, tmp, "evb");
    REQUIRE(ev_b.code == 0);
    const std::string a = testutil::read_file(csv_a);
    const std::string b = testutil::read_file(csv_b);
    CHECK(a == b);
    CHECK(a.rfind("diameter,trials,successes,success_rate,", 0) == 0);

    const CliResult curves = run_cli(
        "emit-curves --metrics " + logs + "/metrics.jsonl --out " + logs + "/curves.csv", tmp,
        "curves");
    REQUIRE(curves.code == 0);
    CHECK(curves.output.find("wrote 2 rows") != std::string::npos);
    const std::string curves_text = testutil::read_file(logs + "/curves.csv");
    CHECK(curves_text.rfind("update,sim_steps,transitions,episodes,ep_reward_mean,", 0) == 0);

    // Resuming from the final checkpoint with the same budget finds the run
    // already complete and reports the restored cumulative counters.
    const std::string logs2 = (tmp.path() / "logs_resume").string();
    const std::string ckpts2 = (tmp.path() / "ckpts_resume").string();
    const std::string resume_common =
        " --train.n_envs 2 --train.rollout_len 16 --train.minibatch_size 32"
        " --train.epochs_per_update 2 --train.hidden_size 16 --train.hidden_depth 1"
        " --seed 7 --paths.log_dir " + logs2 + " --paths.checkpoint_dir " + ckpts2 +
        " --resume " + ckpts + "/final.ckpt";
    const CliResult resume =
        run_cli("train --train.total_steps 64" + resume_common, tmp, "resume");
    REQUIRE(resume.code == 0);
    CHECK(resume.output.find("training complete: 2 updates, 256 sim steps, 64 transitions") !=
          std::string::npos);

    // A larger budget continues where the checkpoint left off.
    const CliResult grow =
        run_cli("train --train.total_steps 96" + resume_common, tmp, "grow");
    REQUIRE(grow.code == 0);
    CHECK(grow.output.find("training complete: 3 updates, 384 sim steps, 96 transitions") !=
          std::string::npos);
    {
        std::ifstream is(logs2 + "/metrics.jsonl");
        std::string line;
        int lines = 0;
        while (std::getline(is, line)) {
            if (!line.empty()) ++lines;
        }
        CHECK(lines == 1);  // only the one new update is logged by the resumed run
    }
}

TEST_CASE("cli: the scripted controller evaluates without a checkpoint") {
    testutil::TempDir tmp("cli_oracle");
    const std::string scene = (tmp.path() / "scene.json").string();
    std::ofstream(scene) << easy_scene_json();
    const std::string csv = (tmp.path() / "oracle.csv").string();
    const CliResult r = run_cli("eval --config " + scene +
                                    " --paths.log_dir " + (tmp.path() / "logs").string() +
                                    " --controller oracle --eval.trials_per_diameter 2"
                                    " --eval.diameters 0.5 --seed 5 --out " + csv,
                                tmp, "oracle");
    REQUIRE(r.code == 0);
    CHECK(r.output.find("overall:") != std::string::npos);
    const std::string text = testutil::read_file(csv);
    CHECK(text.find("0.5,2,") != std::string::npos);
}

TEST_CASE("cli: algorithm presets pick the distribution and perturbation") {
    testutil::TempDir tmp("cli_algo");
    const std::string logs = (tmp.path() / "logs").string();
    const std::string ckpts = (tmp.path() / "ckpts").string();
    const std::string common =
        " --train.total_steps 32 --train.n_envs 2"
        " --train.rollout_len 16 --train.minibatch_size 32"
        " --train.epochs_per_update 1 --train.hidden_size 16"
        " --train.hidden_depth 1 --seed 3 --paths.log_dir " + logs;
    const CliResult train = run_cli(
        "train --algo ppo" + common + " --paths.checkpoint_dir " + ckpts, tmp, "ppo");
    REQUIRE(train.code == 0);
    const CliResult ins = run_cli("inspect --checkpoint " + ckpts + "/final.ckpt", tmp, "insppo");
    REQUIRE(ins.code == 0);
    CHECK(ins.output.find("distribution: gaussian") != std::string::npos);
    CHECK(ins.output.find("robust perturbation: off") != std::string::npos);

    // An explicit distribution flag beats the preset.
    const std::string ckpts2 = (tmp.path() / "ckpts2").string();
    const CliResult t2 = run_cli("train --algo ppo --train.distribution beta" + common +
                                     " --paths.checkpoint_dir " + ckpts2,
                                 tmp, "mix");
    REQUIRE(t2.code == 0);
    const CliResult i2 = run_cli("inspect --checkpoint " + ckpts2 + "/final.ckpt", tmp, "insmix");
    REQUIRE(i2.code == 0);
    CHECK(i2.output.find("distribution: beta") != std::string::npos);
}

TEST_CASE("cli: a diverging run reports a numerical failure with exit 2") {
    testutil::TempDir tmp("cli_numfail");
    const CliResult r = run_cli(
        "train --paths.log_dir " + (tmp.path() / "logs").string() +
            " --paths.checkpoint_dir " + (tmp.path() / "ckpts").string() +
            " --train.total_steps 256 --train.n_envs 2 --train.rollout_len 16"
            " --train.minibatch_size 32 --train.epochs_per_update 2"
            " --train.hidden_size 16 --train.hidden_depth 1 --seed 11"
            " --train.learning_rate 1e25",
        tmp, "diverge");
    CHECK(r.code == 2);
    CHECK(r.output.find("numerical failure") != std::string::npos);
}
