#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "crane/env.hpp"
#include "crane/evalharness.hpp"
#include "crane/trainer.hpp"

namespace crane {

struct RunPaths {
    std::string log_dir = "runs/default/logs";
    std::string checkpoint_dir = "runs/default/checkpoints";
};

struct EvalConfig {
    int trials_per_diameter = 20;
    std::vector<double> diameters = {0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    SuccessCriteria criteria;
};

// The complete, serializable description of a run. Every field has a default;
// a config file may override any subset; unknown keys are rejected with their
// full path. The same structure drives training, evaluation, and inspection.
struct RunConfig {
    std::uint64_t seed = 1;
    RunPaths paths;

    // Machine description (geometry beyond the fixed kinematic chain).
    double grapple_offset = 0.3;
    double jaw_width_max = 1.6;
    std::array<double, 6> max_speed = {1.0, 0.8, 0.8, 1.5, 2.0, 3.0};

    SimConfig sim;
    ScenarioConfig scenario;
    RewardConfig reward;
    TerminationConfig termination;
    NoiseConfig noise;
    int action_repeat = 4;

    TrainConfig train;
    EvalConfig eval;

    CraneModel make_model() const;
    EnvConfig make_env_config() const;
    TrainConfig make_train_config() const;  // with the top-level seed applied

    static RunConfig from_json_string(const std::string& text);
    static RunConfig load(const std::string& path);
    std::string to_json_string(int indent = 2) const;
    void save(const std::string& path) const;
};

}  // namespace crane
