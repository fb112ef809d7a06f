#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "crane/buffer.hpp"
#include "crane/env.hpp"
#include "crane/network.hpp"
#include "crane/policy.hpp"

namespace crane {

struct TrainConfig {
    std::uint64_t total_steps = 500000000ULL;  // environment transitions to collect
    int n_envs = 42;
    int rollout_len = 1000;
    double learning_rate = 3e-4;
    int epochs_per_update = 30;
    int minibatch_size = 4096;
    double clip_ratio = 0.2;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double value_coef = 0.5;
    double entropy_coef = 0.01;
    double max_grad_norm = 0.5;
    DistributionKind distribution_kind = DistributionKind::Beta;
    bool rpo_enabled = true;
    double rpo_epsilon = 0.1;
    int hidden_size = 256;
    int hidden_depth = 4;
    int checkpoint_interval = 25;  // updates between periodic checkpoints
    std::uint64_t seed = 1;

    void validate() const;
};

struct UpdateMetrics {
    int update = 0;
    std::uint64_t sim_steps = 0;    // cumulative simulator steps
    std::uint64_t transitions = 0;  // cumulative env steps (decisions)
    int episodes = 0;               // episodes completed during this update
    double ep_reward_mean = 0.0;    // NaN when no episode completed
    double ep_len_mean = 0.0;       // NaN when no episode completed
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double approx_kl = 0.0;
    double grad_norm = 0.0;
    // Wall-clock diagnostics; excluded from the deterministic digest.
    double steps_per_sec = 0.0;
    double wall_time_s = 0.0;

    // Canonical textual form of the deterministic fields (%.17g floats).
    std::string digest_line() const;
    std::string jsonl() const;
};

// On-policy proximal trainer over a bank of environments. With the Beta head
// and robust action perturbation this is the enhanced variant; with the
// Gaussian head and no perturbation it is the plain baseline.
class Trainer {
public:
    Trainer(const CraneModel& model, const EnvConfig& env_cfg, const TrainConfig& cfg);

    UpdateMetrics run_update();
    bool finished() const { return transitions_ >= cfg_.total_steps; }

    int update_index() const { return update_index_; }
    std::uint64_t sim_steps() const { return sim_steps_; }
    std::uint64_t transitions() const { return transitions_; }
    std::uint64_t sim_steps_per_update() const;
    // Cumulative FNV-1a digest over all updates' digest lines, as hex.
    std::string metrics_digest() const;

    const MlpActorCritic& network() const { return net_; }
    MlpActorCritic& network() { return net_; }
    const PolicyHead& policy_head() const { return head_; }
    const TrainConfig& config() const { return cfg_; }
    const CraneModel& model() const { return model_; }
    const ActionBounds& action_bounds() const { return bounds_; }

    // Deterministic greedy action for an observation (evaluation path).
    ActionCommand act_deterministic(const Observation& obs) const;

    void save_checkpoint(const std::string& path) const;
    void load_checkpoint(const std::string& path);

private:
    struct EpochStats {
        double policy_loss = 0.0, value_loss = 0.0, entropy = 0.0;
        double clip_fraction = 0.0, approx_kl = 0.0, grad_norm = 0.0;
        std::uint64_t samples = 0, batches = 0;
    };

    void collect_rollout(RolloutBuffer& buffer, UpdateMetrics& metrics);
    bool optimize(const RolloutBuffer& buffer, EpochStats& stats);  // false on non-finite
    void assert_policy_invariants() const;

    CraneModel model_;
    EnvConfig env_cfg_;
    TrainConfig cfg_;
    ActionBounds bounds_;
    PolicyHead head_;
    MlpActorCritic net_;
    AdamOptimizer opt_;
    std::vector<GraspEnv> envs_;
    std::vector<RngStream> action_rngs_;
    RngStream shuffle_rng_;
    Eigen::MatrixXd pending_obs_;  // n_envs x kObsDim, normalized
    std::vector<double> ep_return_;
    std::vector<std::uint64_t> ep_len_;

    int update_index_ = 0;
    std::uint64_t sim_steps_ = 0;
    std::uint64_t transitions_ = 0;
    std::uint64_t digest_ = 0xcbf29ce484222325ULL;
    int consecutive_nonfinite_ = 0;
};

struct TrainPaths {
    std::string log_dir;
    std::string checkpoint_dir;
};

struct TrainSummary {
    int updates = 0;
    std::uint64_t sim_steps = 0;
    std::uint64_t transitions = 0;
    std::string metrics_digest;
    std::string final_checkpoint;
};

// Runs updates until the configured step budget is reached, appending one
// JSON line per update to <log_dir>/metrics.jsonl, printing progress (when
// verbose), and writing periodic + final checkpoints.
TrainSummary run_training(Trainer& trainer, const TrainPaths& paths, bool verbose,
                          const std::function<void(const UpdateMetrics&)>& on_update = {});

struct CheckpointInfo {
    std::uint32_t version = 0;
    DistributionKind kind = DistributionKind::Beta;
    bool rpo_enabled = false;
    int n_envs = 0;
    int rollout_len = 0;
    int action_repeat = 0;
    std::uint64_t update_index = 0;
    std::uint64_t sim_steps = 0;
    std::uint64_t transitions = 0;
    NetTopology topology;
    std::string content_hash;  // FNV-1a of the whole file, hex
};
CheckpointInfo inspect_checkpoint(const std::string& path);

}  // namespace crane
