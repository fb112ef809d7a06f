// crane_rl: command-line front end for training, evaluating, and inspecting
// log-grasping controllers.
//
// Exit codes: 0 success, 1 usage/configuration error, 2 numerical failure,
// 3 I/O error.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <string>

#include "crane/config.hpp"
#include "crane/errors.hpp"
#include "crane/evalharness.hpp"
#include "crane/trainer.hpp"

namespace {

using namespace crane;

int log_level() {
    const char* v = std::getenv("CRANE_LOG");
    if (!v) return 1;
    const std::string s(v);
    if (s == "quiet" || s == "0") return 0;
    if (s == "debug" || s == "2") return 2;
    return 1;
}

// Pre-scan argv for --config so file values are in place before CLI11 binds
// explicit flags over them (flags win over the file, the file over defaults).
std::string find_config_arg(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" && i + 1 < argc) return argv[i + 1];
        if (a.rfind("--config=", 0) == 0) return a.substr(9);
    }
    return "";
}

struct CliOptions {
    RunConfig cfg;
    std::string config_path;
    std::string distribution = "beta";
    std::string algo;
    CLI::Option* distribution_opt = nullptr;
    CLI::Option* rpo_opt = nullptr;
};

void add_config_options(CLI::App* cmd, CliOptions& o) {
    RunConfig& c = o.cfg;
    cmd->add_option("--config", o.config_path, "JSON config file (applied before flags)");
    cmd->add_option("--seed", c.seed, "master seed")->capture_default_str();
    cmd->add_option("--paths.log_dir", c.paths.log_dir, "metrics/log directory")->capture_default_str();
    cmd->add_option("--paths.checkpoint_dir", c.paths.checkpoint_dir, "checkpoint directory")->capture_default_str();

    cmd->add_option("--kinematics.grapple_offset", c.grapple_offset, "wrist-to-jaw-center offset [m]")->capture_default_str();
    cmd->add_option("--kinematics.jaw_width_max", c.jaw_width_max, "fully open jaw width [m]")->capture_default_str();
    cmd->add_option("--kinematics.max_speed", c.max_speed, "actuated joint speed caps (6)")->expected(6);

    cmd->add_option("--sim.dt", c.sim.dt, "simulator step [s]")->capture_default_str();
    cmd->add_option("--sim.velocity_tau", c.sim.velocity_tau, "velocity tracking lag [s]")->capture_default_str();
    cmd->add_option("--sim.pendulum_length", c.sim.pendulum_length, "pendulum length [m]")->capture_default_str();
    cmd->add_option("--sim.pendulum_damping", c.sim.pendulum_damping, "pendulum damping [1/s]")->capture_default_str();
    cmd->add_option("--sim.pendulum_coupling", c.sim.pendulum_coupling, "base-acceleration coupling")->capture_default_str();
    cmd->add_option("--sim.gravity", c.sim.gravity, "gravity [m/s^2]")->capture_default_str();
    cmd->add_option("--sim.align_tol", c.sim.align_tol, "capture alignment tolerance")->capture_default_str();

    cmd->add_option("--scenario.slew_min", c.scenario.slew_min, "initial slew min [rad]")->capture_default_str();
    cmd->add_option("--scenario.slew_max", c.scenario.slew_max, "initial slew max [rad]")->capture_default_str();
    cmd->add_option("--scenario.bearing_min", c.scenario.bearing_min, "log bearing min [rad]")->capture_default_str();
    cmd->add_option("--scenario.bearing_max", c.scenario.bearing_max, "log bearing max [rad]")->capture_default_str();
    cmd->add_option("--scenario.radius_min", c.scenario.radius_min, "log radius min [m]")->capture_default_str();
    cmd->add_option("--scenario.radius_max", c.scenario.radius_max, "log radius max [m]")->capture_default_str();
    cmd->add_option("--scenario.diameter_min", c.scenario.diameter_min, "log diameter min [m]")->capture_default_str();
    cmd->add_option("--scenario.diameter_max", c.scenario.diameter_max, "log diameter max [m]")->capture_default_str();
    cmd->add_option("--scenario.yaw_min", c.scenario.yaw_min, "log yaw min [rad]")->capture_default_str();
    cmd->add_option("--scenario.yaw_max", c.scenario.yaw_max, "log yaw max [rad]")->capture_default_str();
    cmd->add_option("--scenario.log_length", c.scenario.log_length, "log length [m]")->capture_default_str();
    cmd->add_option("--scenario.wood_density", c.scenario.wood_density, "wood density [kg/m^3]")->capture_default_str();
    cmd->add_option("--scenario.rest_q2", c.scenario.rest_q2, "rest boom angle [rad]")->capture_default_str();
    cmd->add_option("--scenario.rest_q3", c.scenario.rest_q3, "rest stick angle [rad]")->capture_default_str();
    cmd->add_option("--scenario.rest_q4", c.scenario.rest_q4, "rest telescope extension [m]")->capture_default_str();
    cmd->add_option("--scenario.q7_jitter", c.scenario.q7_jitter, "initial rotator jitter [rad]")->capture_default_str();

    cmd->add_option("--reward.omega1", c.reward.omega1, "angle-distance weight")->capture_default_str();
    cmd->add_option("--reward.omega2", c.reward.omega2, "distance decay rate")->capture_default_str();
    cmd->add_option("--reward.omega3", c.reward.omega3, "lift decay rate")->capture_default_str();
    cmd->add_option("--reward.lift_target", c.reward.lift_target, "desired log height [m]")->capture_default_str();
    cmd->add_option("--reward.d_max_log", c.reward.d_max_log, "largest log diameter [m]")->capture_default_str();

    cmd->add_option("--termination.t_max", c.termination.t_max, "episode cap [s]")->capture_default_str();
    cmd->add_option("--termination.t_limit", c.termination.t_limit, "proximity deadline [s]")->capture_default_str();
    cmd->add_option("--termination.proximity_epsilon", c.termination.proximity_epsilon, "proximity threshold")->capture_default_str();
    cmd->add_option("--termination.out_of_range", c.termination.out_of_range, "abort distance [m]")->capture_default_str();
    cmd->add_option("--termination.lift_tolerance", c.termination.lift_tolerance, "success height band [m]")->capture_default_str();
    cmd->add_option("--termination.q8_close_fraction", c.termination.q8_close_fraction, "full-grasp jaw fraction")->capture_default_str();

    cmd->add_option("--noise.enabled", c.noise.enabled, "observation noise on/off")->capture_default_str();
    cmd->add_option("--noise.epsilon_range", c.noise.epsilon_range, "noise amplitude")->capture_default_str();
    cmd->add_option("--noise.d_noise", c.noise.d_noise, "noise decay distance [m]")->capture_default_str();

    cmd->add_option("--env.action_repeat", c.action_repeat, "simulator steps per action")->capture_default_str();

    cmd->add_option("--train.total_steps", c.train.total_steps, "simulator-step budget")->capture_default_str();
    cmd->add_option("--train.n_envs", c.train.n_envs, "parallel environments")->capture_default_str();
    cmd->add_option("--train.rollout_len", c.train.rollout_len, "env steps per env per update")->capture_default_str();
    cmd->add_option("--train.learning_rate", c.train.learning_rate, "Adam learning rate")->capture_default_str();
    cmd->add_option("--train.epochs_per_update", c.train.epochs_per_update, "optimization epochs")->capture_default_str();
    cmd->add_option("--train.minibatch_size", c.train.minibatch_size, "minibatch size")->capture_default_str();
    cmd->add_option("--train.clip_ratio", c.train.clip_ratio, "surrogate clip range")->capture_default_str();
    cmd->add_option("--train.gamma", c.train.gamma, "discount factor")->capture_default_str();
    cmd->add_option("--train.gae_lambda", c.train.gae_lambda, "advantage smoothing")->capture_default_str();
    cmd->add_option("--train.value_coef", c.train.value_coef, "value loss weight")->capture_default_str();
    cmd->add_option("--train.entropy_coef", c.train.entropy_coef, "entropy bonus weight")->capture_default_str();
    cmd->add_option("--train.max_grad_norm", c.train.max_grad_norm, "gradient clip norm")->capture_default_str();
    cmd->add_option("--train.distribution", o.distribution, "action distribution: beta|gaussian")
        ->check(CLI::IsMember({"beta", "gaussian"}))
        ->capture_default_str();
    cmd->add_option("--train.rpo_enabled", c.train.rpo_enabled, "robust action perturbation on/off")
        ->capture_default_str();
    cmd->add_option("--train.rpo_epsilon", c.train.rpo_epsilon, "perturbation amplitude")->capture_default_str();
    cmd->add_option("--train.hidden_size", c.train.hidden_size, "trunk width")->capture_default_str();
    cmd->add_option("--train.hidden_depth", c.train.hidden_depth, "trunk depth")->capture_default_str();
    cmd->add_option("--train.checkpoint_interval", c.train.checkpoint_interval, "updates between checkpoints")->capture_default_str();

    cmd->add_option("--eval.trials_per_diameter", c.eval.trials_per_diameter, "episodes per diameter")->capture_default_str();
    cmd->add_option("--eval.diameters", c.eval.diameters, "diameters to evaluate [m]");
    cmd->add_option("--eval.reach_deadline", c.eval.criteria.reach_deadline, "proximity deadline [s]")->capture_default_str();
    cmd->add_option("--eval.grasp_deadline", c.eval.criteria.grasp_deadline, "grasp deadline [s]")->capture_default_str();
    cmd->add_option("--eval.center_miss_threshold", c.eval.criteria.center_miss_threshold, "axial miss allowance [m]")->capture_default_str();

    cmd->add_option("--algo", o.algo, "preset: mppo (beta + perturbation) or ppo (gaussian baseline)")
        ->check(CLI::IsMember({"mppo", "ppo"}));
}

void finalize_distribution(CliOptions& o) {
    const bool dist_given = o.distribution_opt && o.distribution_opt->count() > 0;
    const bool rpo_given = o.rpo_opt && o.rpo_opt->count() > 0;
    if (!o.algo.empty()) {
        if (!dist_given) {
            o.cfg.train.distribution_kind =
                o.algo == "ppo" ? DistributionKind::Gaussian : DistributionKind::Beta;
        }
        if (!rpo_given) o.cfg.train.rpo_enabled = o.algo != "ppo";
    }
    if (dist_given) {
        o.cfg.train.distribution_kind =
            o.distribution == "gaussian" ? DistributionKind::Gaussian : DistributionKind::Beta;
    }
}

// Wraps a trained network as an evaluation controller (greedy actions).
class PolicyController : public Controller {
public:
    explicit PolicyController(const Trainer& trainer) : trainer_(trainer) {}
    ActionCommand act(const Observation& obs, const GraspEnv& env) override {
        (void)env;
        return trainer_.act_deterministic(obs);
    }

private:
    const Trainer& trainer_;
};

int cmd_train(CliOptions& o, const std::string& resume) {
    finalize_distribution(o);
    namespace fs = std::filesystem;
    fs::create_directories(o.cfg.paths.log_dir);
    fs::create_directories(o.cfg.paths.checkpoint_dir);
    o.cfg.save(o.cfg.paths.log_dir + "/effective_config.json");

    Trainer trainer(o.cfg.make_model(), o.cfg.make_env_config(), o.cfg.make_train_config());
    if (!resume.empty()) trainer.load_checkpoint(resume);

    TrainPaths paths{o.cfg.paths.log_dir, o.cfg.paths.checkpoint_dir};
    const TrainSummary s = run_training(trainer, paths, log_level() >= 1);
    std::printf("training complete: %d updates, %llu sim steps, %llu transitions\n",
                s.updates, static_cast<unsigned long long>(s.sim_steps),
                static_cast<unsigned long long>(s.transitions));
    std::printf("metrics digest: %s\nfinal checkpoint: %s\n", s.metrics_digest.c_str(),
                s.final_checkpoint.c_str());
    return 0;
}

int cmd_eval(CliOptions& o, const std::string& policy_path, const std::string& controller_name,
             const std::string& out_path, const std::string& trajectory_dir) {
    finalize_distribution(o);
    namespace fs = std::filesystem;
    fs::create_directories(o.cfg.paths.log_dir);
    o.cfg.save(o.cfg.paths.log_dir + "/effective_config.json");
    if (!trajectory_dir.empty()) fs::create_directories(trajectory_dir);

    const CraneModel model = o.cfg.make_model();
    const EnvConfig env_cfg = o.cfg.make_env_config();

    std::unique_ptr<Controller> controller;
    std::unique_ptr<Trainer> trainer;
    if (!policy_path.empty()) {
        trainer = std::make_unique<Trainer>(model, env_cfg, o.cfg.make_train_config());
        trainer->load_checkpoint(policy_path);
        controller = std::make_unique<PolicyController>(*trainer);
    } else if (controller_name == "oracle") {
        controller = std::make_unique<OracleController>();
    } else {
        throw ConfigError("eval: pass --policy CHECKPOINT or --controller oracle");
    }

    const EvalReport report =
        monte_carlo(*controller, model, env_cfg, o.cfg.eval.diameters,
                    o.cfg.eval.trials_per_diameter, o.cfg.eval.criteria, o.cfg.seed,
                    trajectory_dir);

    const std::string out = out_path.empty() ? o.cfg.paths.log_dir + "/eval.csv" : out_path;
    std::ofstream csv(out, std::ios::trunc);
    if (!csv) throw IoError("cannot write eval table: " + out);
    write_eval_csv(report, csv);
    if (!csv) throw IoError("failed writing eval table: " + out);
    write_eval_text(report, std::cout);
    std::printf("table written to %s\n", out.c_str());
    return 0;
}

int cmd_inspect(CliOptions& o, const std::string& checkpoint_path, bool show_config) {
    if (!checkpoint_path.empty()) {
        const CheckpointInfo info = inspect_checkpoint(checkpoint_path);
        std::printf("checkpoint: %s\n", checkpoint_path.c_str());
        std::printf("  version: %u\n", info.version);
        std::printf("  distribution: %s\n", to_string(info.kind));
        std::printf("  robust perturbation: %s\n", info.rpo_enabled ? "on" : "off");
        std::printf("  envs: %d  rollout: %d  action_repeat: %d\n", info.n_envs,
                    info.rollout_len, info.action_repeat);
        std::printf("  updates: %llu  sim_steps: %llu  transitions: %llu\n",
                    static_cast<unsigned long long>(info.update_index),
                    static_cast<unsigned long long>(info.sim_steps),
                    static_cast<unsigned long long>(info.transitions));
        std::printf("  network: obs %d -> %d x %d -> actor %d (+%d sigma), value 1\n",
                    info.topology.obs_dim, info.topology.hidden_depth,
                    info.topology.hidden_size, info.topology.actor_dim,
                    info.topology.log_sigma_dim);
        std::printf("  content hash: %s\n", info.content_hash.c_str());
        return 0;
    }
    if (show_config) {
        finalize_distribution(o);
        std::printf("%s\n", o.cfg.to_json_string().c_str());
        return 0;
    }
    throw ConfigError("inspect: pass --checkpoint PATH or --show-config");
}

int cmd_emit_curves(CliOptions& o, const std::string& metrics_path, const std::string& out_path) {
    const std::string in =
        metrics_path.empty() ? o.cfg.paths.log_dir + "/metrics.jsonl" : metrics_path;
    const std::string out = out_path.empty() ? o.cfg.paths.log_dir + "/curves.csv" : out_path;

    std::ifstream is(in);
    if (!is) throw IoError("cannot open metrics log: " + in);
    std::ofstream os(out, std::ios::trunc);
    if (!os) throw IoError("cannot write curves: " + out);

    os << "update,sim_steps,transitions,episodes,ep_reward_mean,ep_len_mean,policy_loss,"
          "value_loss,entropy,clip_fraction,approx_kl,grad_norm\n";
    const char* keys[] = {"update",      "sim_steps",   "transitions", "episodes",
                          "ep_reward_mean", "ep_len_mean", "policy_loss", "value_loss",
                          "entropy",     "clip_fraction", "approx_kl",  "grad_norm"};
    std::string line;
    int rows = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError("metrics log is corrupt: " + std::string(e.what()));
        }
        bool first = true;
        for (const char* k : keys) {
            if (!first) os << ',';
            first = false;
            const auto it = j.find(k);
            if (it == j.end() || it->is_null()) continue;
            if (it->is_number_integer()) {
                os << it->get<long long>();
            } else {
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.17g", it->get<double>());
                os << buf;
            }
        }
        os << '\n';
        ++rows;
    }
    if (!os) throw IoError("failed writing curves: " + out);
    std::printf("wrote %d rows to %s\n", rows, out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crane_rl: train and evaluate wood-log grasping controllers"};
    app.require_subcommand(1);

    CliOptions o;
    const std::string config_arg = find_config_arg(argc, argv);
    try {
        if (!config_arg.empty()) o.cfg = RunConfig::load(config_arg);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    o.distribution = to_string(o.cfg.train.distribution_kind);

    CLI::App* train = app.add_subcommand("train", "run policy optimization");
    std::string resume;
    add_config_options(train, o);
    train->add_option("--resume", resume, "checkpoint to continue from");

    CLI::App* eval = app.add_subcommand("eval", "Monte Carlo evaluation");
    std::string policy_path, controller_name = "oracle", eval_out, trajectory_dir;
    add_config_options(eval, o);
    eval->add_option("--policy", policy_path, "policy checkpoint to evaluate");
    eval->add_option("--controller", controller_name, "scripted controller: oracle")
        ->check(CLI::IsMember({"oracle"}));
    eval->add_option("--out", eval_out, "output CSV path (default <log_dir>/eval.csv)");
    eval->add_option("--trajectories", trajectory_dir, "write per-trial state CSVs here");

    CLI::App* inspect = app.add_subcommand("inspect", "describe a checkpoint or the config");
    std::string inspect_ckpt;
    bool show_config = false;
    add_config_options(inspect, o);
    inspect->add_option("--checkpoint", inspect_ckpt, "checkpoint to describe");
    inspect->add_flag("--show-config", show_config, "print the effective config as JSON");

    CLI::App* curves = app.add_subcommand("emit-curves", "convert metrics.jsonl to CSV");
    std::string metrics_path, curves_out;
    add_config_options(curves, o);
    curves->add_option("--metrics", metrics_path, "metrics.jsonl path (default <log_dir>/metrics.jsonl)");
    curves->add_option("--out", curves_out, "output CSV path (default <log_dir>/curves.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        CLI::App* active = nullptr;
        for (CLI::App* sub : {train, eval, inspect, curves}) {
            if (app.got_subcommand(sub)) active = sub;
        }
        if (active) {
            o.distribution_opt = active->get_option_no_throw("--train.distribution");
            o.rpo_opt = active->get_option_no_throw("--train.rpo_enabled");
        }
        if (active == train) return cmd_train(o, resume);
        if (active == eval) {
            return cmd_eval(o, policy_path, controller_name, eval_out, trajectory_dir);
        }
        if (active == inspect) return cmd_inspect(o, inspect_ckpt, show_config);
        if (active == curves) return cmd_emit_curves(o, metrics_path, curves_out);
        std::fprintf(stderr, "error: no subcommand\n");
        return 1;
    } catch (const NumericalFailure& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    } catch (const LimitViolation& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 3;
    } catch (const CraneError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
