#include "crane/config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace crane {

namespace {
using nlohmann::json;

void check_keys(const json& j, const std::string& prefix,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed) {
            if (item.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError("config: unknown key '" +
                              (prefix.empty() ? item.key() : prefix + "." + item.key()) + "'");
        }
    }
}

const json* section(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end()) return nullptr;
    if (!it->is_object()) throw ConfigError(std::string("config: '") + key + "' must be an object");
    return &*it;
}

template <typename T>
void read_field(const json& j, const std::string& prefix, const char* key, T& out) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    try {
        it->get_to(out);
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for '" + prefix + "." + key + "': " + e.what());
    }
}

void read_field(const json& j, const std::string& prefix, const char* key,
                std::array<double, 6>& out) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_array() || it->size() != 6) {
        throw ConfigError("config: '" + prefix + "." + key + "' must be an array of 6 numbers");
    }
    try {
        for (std::size_t i = 0; i < 6; ++i) (*it)[i].get_to(out[i]);
    } catch (const json::exception& e) {
        throw ConfigError("config: bad value for '" + prefix + "." + key + "': " + e.what());
    }
}

void read_field(const json& j, const std::string& prefix, const char* key,
                DistributionKind& out) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    const std::string s = it->is_string() ? it->get<std::string>() : std::string();
    if (s == "beta") {
        out = DistributionKind::Beta;
    } else if (s == "gaussian") {
        out = DistributionKind::Gaussian;
    } else {
        throw ConfigError("config: '" + prefix + "." + key + "' must be \"beta\" or \"gaussian\"");
    }
}
}  // namespace

CraneModel RunConfig::make_model() const {
    CraneModel model;
    model.set_grapple_offset(grapple_offset);
    model.set_jaw_width_max(jaw_width_max);
    for (int i = 0; i < kNumActuated; ++i) {
        model.limits().max_speed[i] = max_speed[static_cast<std::size_t>(i)];
    }
    return model;
}

EnvConfig RunConfig::make_env_config() const {
    EnvConfig cfg;
    cfg.scenario = scenario;
    cfg.reward = reward;
    cfg.reward.q8_closed = make_model().q8_closed();
    cfg.termination = termination;
    cfg.noise = noise;
    cfg.sim = sim;
    cfg.action_repeat = action_repeat;
    return cfg;
}

TrainConfig RunConfig::make_train_config() const {
    TrainConfig cfg = train;
    cfg.seed = seed;
    return cfg;
}

RunConfig RunConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");

    RunConfig cfg;
    check_keys(j, "",
               {"seed", "paths", "kinematics", "sim", "scenario", "reward", "termination",
                "noise", "env", "train", "eval"});
    read_field(j, "", "seed", cfg.seed);

    if (const json* p = section(j, "paths")) {
        check_keys(*p, "paths", {"log_dir", "checkpoint_dir"});
        read_field(*p, "paths", "log_dir", cfg.paths.log_dir);
        read_field(*p, "paths", "checkpoint_dir", cfg.paths.checkpoint_dir);
    }
    if (const json* p = section(j, "kinematics")) {
        check_keys(*p, "kinematics", {"grapple_offset", "jaw_width_max", "max_speed"});
        read_field(*p, "kinematics", "grapple_offset", cfg.grapple_offset);
        read_field(*p, "kinematics", "jaw_width_max", cfg.jaw_width_max);
        read_field(*p, "kinematics", "max_speed", cfg.max_speed);
    }
    if (const json* p = section(j, "sim")) {
        check_keys(*p, "sim",
                   {"dt", "velocity_tau", "pendulum_length", "pendulum_damping",
                    "pendulum_coupling", "gravity", "align_tol"});
        read_field(*p, "sim", "dt", cfg.sim.dt);
        read_field(*p, "sim", "velocity_tau", cfg.sim.velocity_tau);
        read_field(*p, "sim", "pendulum_length", cfg.sim.pendulum_length);
        read_field(*p, "sim", "pendulum_damping", cfg.sim.pendulum_damping);
        read_field(*p, "sim", "pendulum_coupling", cfg.sim.pendulum_coupling);
        read_field(*p, "sim", "gravity", cfg.sim.gravity);
        read_field(*p, "sim", "align_tol", cfg.sim.align_tol);
    }
    if (const json* p = section(j, "scenario")) {
        check_keys(*p, "scenario",
                   {"slew_min", "slew_max", "bearing_min", "bearing_max", "radius_min",
                    "radius_max", "diameter_min", "diameter_max", "yaw_min", "yaw_max",
                    "log_length", "wood_density", "rest_q2", "rest_q3", "rest_q4",
                    "q7_jitter"});
        read_field(*p, "scenario", "slew_min", cfg.scenario.slew_min);
        read_field(*p, "scenario", "slew_max", cfg.scenario.slew_max);
        read_field(*p, "scenario", "bearing_min", cfg.scenario.bearing_min);
        read_field(*p, "scenario", "bearing_max", cfg.scenario.bearing_max);
        read_field(*p, "scenario", "radius_min", cfg.scenario.radius_min);
        read_field(*p, "scenario", "radius_max", cfg.scenario.radius_max);
        read_field(*p, "scenario", "diameter_min", cfg.scenario.diameter_min);
        read_field(*p, "scenario", "diameter_max", cfg.scenario.diameter_max);
        read_field(*p, "scenario", "yaw_min", cfg.scenario.yaw_min);
        read_field(*p, "scenario", "yaw_max", cfg.scenario.yaw_max);
        read_field(*p, "scenario", "log_length", cfg.scenario.log_length);
        read_field(*p, "scenario", "wood_density", cfg.scenario.wood_density);
        read_field(*p, "scenario", "rest_q2", cfg.scenario.rest_q2);
        read_field(*p, "scenario", "rest_q3", cfg.scenario.rest_q3);
        read_field(*p, "scenario", "rest_q4", cfg.scenario.rest_q4);
        read_field(*p, "scenario", "q7_jitter", cfg.scenario.q7_jitter);
    }
    if (const json* p = section(j, "reward")) {
        check_keys(*p, "reward", {"omega1", "omega2", "omega3", "lift_target", "d_max_log"});
        read_field(*p, "reward", "omega1", cfg.reward.omega1);
        read_field(*p, "reward", "omega2", cfg.reward.omega2);
        read_field(*p, "reward", "omega3", cfg.reward.omega3);
        read_field(*p, "reward", "lift_target", cfg.reward.lift_target);
        read_field(*p, "reward", "d_max_log", cfg.reward.d_max_log);
    }
    if (const json* p = section(j, "termination")) {
        check_keys(*p, "termination",
                   {"t_max", "t_limit", "proximity_epsilon", "out_of_range", "lift_tolerance",
                    "q8_close_fraction"});
        read_field(*p, "termination", "t_max", cfg.termination.t_max);
        read_field(*p, "termination", "t_limit", cfg.termination.t_limit);
        read_field(*p, "termination", "proximity_epsilon", cfg.termination.proximity_epsilon);
        read_field(*p, "termination", "out_of_range", cfg.termination.out_of_range);
        read_field(*p, "termination", "lift_tolerance", cfg.termination.lift_tolerance);
        read_field(*p, "termination", "q8_close_fraction", cfg.termination.q8_close_fraction);
    }
    if (const json* p = section(j, "noise")) {
        check_keys(*p, "noise", {"enabled", "epsilon_range", "d_noise"});
        read_field(*p, "noise", "enabled", cfg.noise.enabled);
        read_field(*p, "noise", "epsilon_range", cfg.noise.epsilon_range);
        read_field(*p, "noise", "d_noise", cfg.noise.d_noise);
    }
    if (const json* p = section(j, "env")) {
        check_keys(*p, "env", {"action_repeat"});
        read_field(*p, "env", "action_repeat", cfg.action_repeat);
    }
    if (const json* p = section(j, "train")) {
        check_keys(*p, "train",
                   {"total_steps", "n_envs", "rollout_len", "learning_rate",
                    "epochs_per_update", "minibatch_size", "clip_ratio", "gamma", "gae_lambda",
                    "value_coef", "entropy_coef", "max_grad_norm", "distribution",
                    "rpo_enabled", "rpo_epsilon", "hidden_size", "hidden_depth",
                    "checkpoint_interval"});
        read_field(*p, "train", "total_steps", cfg.train.total_steps);
        read_field(*p, "train", "n_envs", cfg.train.n_envs);
        read_field(*p, "train", "rollout_len", cfg.train.rollout_len);
        read_field(*p, "train", "learning_rate", cfg.train.learning_rate);
        read_field(*p, "train", "epochs_per_update", cfg.train.epochs_per_update);
        read_field(*p, "train", "minibatch_size", cfg.train.minibatch_size);
        read_field(*p, "train", "clip_ratio", cfg.train.clip_ratio);
        read_field(*p, "train", "gamma", cfg.train.gamma);
        read_field(*p, "train", "gae_lambda", cfg.train.gae_lambda);
        read_field(*p, "train", "value_coef", cfg.train.value_coef);
        read_field(*p, "train", "entropy_coef", cfg.train.entropy_coef);
        read_field(*p, "train", "max_grad_norm", cfg.train.max_grad_norm);
        read_field(*p, "train", "distribution", cfg.train.distribution_kind);
        read_field(*p, "train", "rpo_enabled", cfg.train.rpo_enabled);
        read_field(*p, "train", "rpo_epsilon", cfg.train.rpo_epsilon);
        read_field(*p, "train", "hidden_size", cfg.train.hidden_size);
        read_field(*p, "train", "hidden_depth", cfg.train.hidden_depth);
        read_field(*p, "train", "checkpoint_interval", cfg.train.checkpoint_interval);
    }
    if (const json* p = section(j, "eval")) {
        check_keys(*p, "eval",
                   {"trials_per_diameter", "diameters", "reach_deadline", "grasp_deadline",
                    "center_miss_threshold"});
        read_field(*p, "eval", "trials_per_diameter", cfg.eval.trials_per_diameter);
        read_field(*p, "eval", "diameters", cfg.eval.diameters);
        read_field(*p, "eval", "reach_deadline", cfg.eval.criteria.reach_deadline);
        read_field(*p, "eval", "grasp_deadline", cfg.eval.criteria.grasp_deadline);
        read_field(*p, "eval", "center_miss_threshold", cfg.eval.criteria.center_miss_threshold);
    }
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return from_json_string(buf.str());
}

std::string RunConfig::to_json_string(int indent) const {
    json j;
    j["seed"] = seed;
    j["paths"] = {{"log_dir", paths.log_dir}, {"checkpoint_dir", paths.checkpoint_dir}};
    j["kinematics"] = {{"grapple_offset", grapple_offset},
                       {"jaw_width_max", jaw_width_max},
                       {"max_speed", max_speed}};
    j["sim"] = {{"dt", sim.dt},
                {"velocity_tau", sim.velocity_tau},
                {"pendulum_length", sim.pendulum_length},
                {"pendulum_damping", sim.pendulum_damping},
                {"pendulum_coupling", sim.pendulum_coupling},
                {"gravity", sim.gravity},
                {"align_tol", sim.align_tol}};
    j["scenario"] = {{"slew_min", scenario.slew_min},
                     {"slew_max", scenario.slew_max},
                     {"bearing_min", scenario.bearing_min},
                     {"bearing_max", scenario.bearing_max},
                     {"radius_min", scenario.radius_min},
                     {"radius_max", scenario.radius_max},
                     {"diameter_min", scenario.diameter_min},
                     {"diameter_max", scenario.diameter_max},
                     {"yaw_min", scenario.yaw_min},
                     {"yaw_max", scenario.yaw_max},
                     {"log_length", scenario.log_length},
                     {"wood_density", scenario.wood_density},
                     {"rest_q2", scenario.rest_q2},
                     {"rest_q3", scenario.rest_q3},
                     {"rest_q4", scenario.rest_q4},
                     {"q7_jitter", scenario.q7_jitter}};
    j["reward"] = {{"omega1", reward.omega1},
                   {"omega2", reward.omega2},
                   {"omega3", reward.omega3},
                   {"lift_target", reward.lift_target},
                   {"d_max_log", reward.d_max_log}};
    j["termination"] = {{"t_max", termination.t_max},
                        {"t_limit", termination.t_limit},
                        {"proximity_epsilon", termination.proximity_epsilon},
                        {"out_of_range", termination.out_of_range},
                        {"lift_tolerance", termination.lift_tolerance},
                        {"q8_close_fraction", termination.q8_close_fraction}};
    j["noise"] = {{"enabled", noise.enabled},
                  {"epsilon_range", noise.epsilon_range},
                  {"d_noise", noise.d_noise}};
    j["env"] = {{"action_repeat", action_repeat}};
    j["train"] = {{"total_steps", train.total_steps},
                  {"n_envs", train.n_envs},
                  {"rollout_len", train.rollout_len},
                  {"learning_rate", train.learning_rate},
                  {"epochs_per_update", train.epochs_per_update},
                  {"minibatch_size", train.minibatch_size},
                  {"clip_ratio", train.clip_ratio},
                  {"gamma", train.gamma},
                  {"gae_lambda", train.gae_lambda},
                  {"value_coef", train.value_coef},
                  {"entropy_coef", train.entropy_coef},
                  {"max_grad_norm", train.max_grad_norm},
                  {"distribution", std::string(to_string(train.distribution_kind))},
                  {"rpo_enabled", train.rpo_enabled},
                  {"rpo_epsilon", train.rpo_epsilon},
                  {"hidden_size", train.hidden_size},
                  {"hidden_depth", train.hidden_depth},
                  {"checkpoint_interval", train.checkpoint_interval}};
    j["eval"] = {{"trials_per_diameter", eval.trials_per_diameter},
                 {"diameters", eval.diameters},
                 {"reach_deadline", eval.criteria.reach_deadline},
                 {"grasp_deadline", eval.criteria.grasp_deadline},
                 {"center_miss_threshold", eval.criteria.center_miss_threshold}};
    return j.dump(indent);
}

void RunConfig::save(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write config file: " + path);
    os << to_json_string() << '\n';
    if (!os) throw IoError("failed writing config file: " + path);
}

}  // namespace crane
