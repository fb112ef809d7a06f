#include "crane/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "crane/hash.hpp"

namespace crane {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

std::string num_or_null(double v) {
    return std::isfinite(v) ? fmt("%.17g", v) : std::string("null");
}
}  // namespace

void TrainConfig::validate() const {
    if (n_envs < 1 || rollout_len < 1) throw ConfigError("train: n_envs and rollout_len must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
    if (epochs_per_update < 1) throw ConfigError("train: epochs_per_update must be >= 1");
    if (minibatch_size < 1) throw ConfigError("train: minibatch_size must be >= 1");
    if (!(clip_ratio > 0.0 && clip_ratio < 1.0)) throw ConfigError("train: clip_ratio must be in (0, 1)");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("train: gamma must be in (0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("train: gae_lambda must be in [0, 1]");
    if (value_coef < 0.0 || entropy_coef < 0.0) throw ConfigError("train: loss coefficients must be >= 0");
    if (rpo_epsilon < 0.0) throw ConfigError("train: rpo_epsilon must be >= 0");
    if (hidden_size < 1 || hidden_depth < 1) throw ConfigError("train: network dimensions must be >= 1");
}

std::string UpdateMetrics::digest_line() const {
    std::string s;
    s.reserve(320);
    char head[96];
    std::snprintf(head, sizeof(head), "update=%d sim_steps=%llu transitions=%llu episodes=%d",
                  update, static_cast<unsigned long long>(sim_steps),
                  static_cast<unsigned long long>(transitions), episodes);
    s += head;
    s += " ep_reward_mean=" + fmt("%.17g", ep_reward_mean);
    s += " ep_len_mean=" + fmt("%.17g", ep_len_mean);
    s += " policy_loss=" + fmt("%.17g", policy_loss);
    s += " value_loss=" + fmt("%.17g", value_loss);
    s += " entropy=" + fmt("%.17g", entropy);
    s += " clip_fraction=" + fmt("%.17g", clip_fraction);
    s += " approx_kl=" + fmt("%.17g", approx_kl);
    s += " grad_norm=" + fmt("%.17g", grad_norm);
    return s;
}

std::string UpdateMetrics::jsonl() const {
    std::string s;
    s.reserve(384);
    char head[128];
    std::snprintf(head, sizeof(head),
                  "{\"update\":%d,\"sim_steps\":%llu,\"transitions\":%llu,\"episodes\":%d",
                  update, static_cast<unsigned long long>(sim_steps),
                  static_cast<unsigned long long>(transitions), episodes);
    s += head;
    s += ",\"ep_reward_mean\":" + num_or_null(ep_reward_mean);
    s += ",\"ep_len_mean\":" + num_or_null(ep_len_mean);
    s += ",\"policy_loss\":" + num_or_null(policy_loss);
    s += ",\"value_loss\":" + num_or_null(value_loss);
    s += ",\"entropy\":" + num_or_null(entropy);
    s += ",\"clip_fraction\":" + num_or_null(clip_fraction);
    s += ",\"approx_kl\":" + num_or_null(approx_kl);
    s += ",\"grad_norm\":" + num_or_null(grad_norm);
    s += ",\"steps_per_sec\":" + num_or_null(steps_per_sec);
    s += ",\"wall_time_s\":" + num_or_null(wall_time_s);
    s += "}";
    return s;
}

Trainer::Trainer(const CraneModel& model, const EnvConfig& env_cfg, const TrainConfig& cfg)
    : model_(model),
      env_cfg_(env_cfg),
      cfg_(cfg),
      bounds_(ActionBounds::from_limits(model.limits())),
      head_(cfg.distribution_kind, kNumActuated, cfg.rpo_epsilon),
      net_([&] {
          NetTopology t;
          t.obs_dim = kObsDim;
          t.hidden_size = cfg.hidden_size;
          t.hidden_depth = cfg.hidden_depth;
          t.actor_dim = PolicyHead(cfg.distribution_kind, kNumActuated).actor_raw_dim();
          t.log_sigma_dim = PolicyHead(cfg.distribution_kind, kNumActuated).log_sigma_dim();
          return MlpActorCritic(t);
      }()),
      opt_(net_.param_count(), cfg.learning_rate),
      shuffle_rng_(0) {
    cfg_.validate();
    RngStream master(cfg_.seed);
    RngStream init_rng = master.child(1);
    net_.init_weights(init_rng);
    shuffle_rng_ = master.child(3);

    envs_.reserve(static_cast<std::size_t>(cfg_.n_envs));
    action_rngs_.reserve(static_cast<std::size_t>(cfg_.n_envs));
    pending_obs_ = Eigen::MatrixXd::Zero(cfg_.n_envs, kObsDim);
    ep_return_.assign(static_cast<std::size_t>(cfg_.n_envs), 0.0);
    ep_len_.assign(static_cast<std::size_t>(cfg_.n_envs), 0);
    for (int i = 0; i < cfg_.n_envs; ++i) {
        envs_.emplace_back(model_, env_cfg_, master.child(1000 + static_cast<std::uint64_t>(i)));
        action_rngs_.push_back(master.child(2000 + static_cast<std::uint64_t>(i)));
        const Observation o = envs_.back().reset();
        pending_obs_.row(i) = normalize_observation(o, model_.limits()).transpose();
    }
}

std::uint64_t Trainer::sim_steps_per_update() const {
    return static_cast<std::uint64_t>(cfg_.n_envs) *
           static_cast<std::uint64_t>(cfg_.rollout_len) *
           static_cast<std::uint64_t>(env_cfg_.action_repeat);
}

std::string Trainer::metrics_digest() const { return to_hex(digest_); }

ActionCommand Trainer::act_deterministic(const Observation& obs) const {
    Eigen::MatrixXd x(1, kObsDim);
    x.row(0) = normalize_observation(obs, model_.limits()).transpose();
    const MlpActorCritic::Forward fwd = net_.forward(x);
    const Eigen::RowVectorXd raw = fwd.actor_raw.row(0);
    const ActuatedVector a_n = head_.mean_action(raw, net_.log_sigma_vector());
    return ActionCommand{denormalize_action(a_n, bounds_)};
}

void Trainer::collect_rollout(RolloutBuffer& buffer, UpdateMetrics& metrics) {
    const JointLimits& limits = model_.limits();
    const Eigen::VectorXd log_sigma = net_.log_sigma_vector();
    double ep_reward_sum = 0.0;
    double ep_len_sum = 0.0;

    for (int t = 0; t < cfg_.rollout_len; ++t) {
        const MlpActorCritic::Forward fwd = net_.forward(pending_obs_);
        for (int i = 0; i < cfg_.n_envs; ++i) {
            const Eigen::RowVectorXd raw = fwd.actor_raw.row(i);
            const PolicyHead::SampledAction s =
                head_.sample(raw, log_sigma, action_rngs_[static_cast<std::size_t>(i)],
                             cfg_.rpo_enabled);
            const GraspEnv::StepResult res =
                envs_[static_cast<std::size_t>(i)].env_step(
                    ActionCommand{denormalize_action(s.a_n, bounds_)});
            const bool done = res.termination.has_value();
            buffer.set_step(i, t, pending_obs_.row(i).transpose(), s.a_n, s.log_prob,
                            res.reward.total, fwd.value[i], done,
                            done ? static_cast<std::uint8_t>(*res.termination) : 255);
            ep_return_[static_cast<std::size_t>(i)] += res.reward.total;
            ep_len_[static_cast<std::size_t>(i)] += 1;
            if (done) {
                metrics.episodes += 1;
                ep_reward_sum += ep_return_[static_cast<std::size_t>(i)];
                ep_len_sum += static_cast<double>(ep_len_[static_cast<std::size_t>(i)]);
                ep_return_[static_cast<std::size_t>(i)] = 0.0;
                ep_len_[static_cast<std::size_t>(i)] = 0;
                const Observation o = envs_[static_cast<std::size_t>(i)].reset();
                pending_obs_.row(i) = normalize_observation(o, limits).transpose();
            } else {
                pending_obs_.row(i) = normalize_observation(res.obs, limits).transpose();
            }
        }
    }
    const MlpActorCritic::Forward tail = net_.forward(pending_obs_);
    for (int i = 0; i < cfg_.n_envs; ++i) buffer.set_bootstrap(i, tail.value[i]);

    metrics.ep_reward_mean = metrics.episodes > 0
                                 ? ep_reward_sum / static_cast<double>(metrics.episodes)
                                 : kNaN;
    metrics.ep_len_mean = metrics.episodes > 0
                              ? ep_len_sum / static_cast<double>(metrics.episodes)
                              : kNaN;
}

bool Trainer::optimize(const RolloutBuffer& buffer, EpochStats& stats) {
    const int n = buffer.size();
    const int raw_dim = head_.actor_raw_dim();
    const int ls_dim = head_.log_sigma_dim();
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    double pg_sum = 0.0, v_sum = 0.0, ent_sum = 0.0, kl_sum = 0.0, gnorm_sum = 0.0;
    std::uint64_t clip_count = 0, samples = 0, batches = 0;

    for (int epoch = 0; epoch < cfg_.epochs_per_update; ++epoch) {
        // Fisher-Yates with the dedicated shuffle stream.
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(shuffle_rng_.uniform01() * (i + 1));
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(std::min(j, i))]);
        }
        for (int start = 0; start < n; start += cfg_.minibatch_size) {
            const int count = std::min(cfg_.minibatch_size, n - start);
            Eigen::MatrixXd mb_obs(count, pending_obs_.cols());
            for (int r = 0; r < count; ++r) {
                mb_obs.row(r) = buffer.obs().row(order[static_cast<std::size_t>(start + r)]);
            }
            const MlpActorCritic::Forward fwd = net_.forward(mb_obs);
            const Eigen::VectorXd log_sigma = net_.log_sigma_vector();

            Eigen::MatrixXd d_raw = Eigen::MatrixXd::Zero(count, raw_dim);
            Eigen::VectorXd d_value(count);
            Eigen::VectorXd d_log_sigma_acc = Eigen::VectorXd::Zero(ls_dim);
            Eigen::RowVectorXd dlp(raw_dim), dent(raw_dim);
            Eigen::VectorXd dlp_ls(ls_dim), dent_ls(ls_dim);

            const double inv_count = 1.0 / static_cast<double>(count);
            for (int r = 0; r < count; ++r) {
                const int idx = order[static_cast<std::size_t>(start + r)];
                const Eigen::RowVectorXd raw = fwd.actor_raw.row(r);
                const ActuatedVector a_n = buffer.actions().row(idx).transpose();
                const double lp_new = head_.log_prob(raw, log_sigma, a_n);
                const double ent = head_.entropy(raw, log_sigma);
                const double v = fwd.value[r];
                if (!std::isfinite(lp_new) || !std::isfinite(ent) || !std::isfinite(v)) {
                    return false;
                }
                const double lp_old = buffer.log_probs()[idx];
                const double adv = buffer.advantages()[idx];
                const double ratio = std::exp(lp_new - lp_old);
                const double clipped =
                    std::clamp(ratio, 1.0 - cfg_.clip_ratio, 1.0 + cfg_.clip_ratio);
                pg_sum += -std::min(ratio * adv, clipped * adv);
                if (std::abs(ratio - 1.0) > cfg_.clip_ratio) ++clip_count;
                kl_sum += lp_old - lp_new;
                ent_sum += ent;

                const double v_err = v - buffer.returns()[idx];
                v_sum += v_err * v_err;
                d_value[r] = cfg_.value_coef * 2.0 * v_err * inv_count;

                const bool pg_active = !((adv > 0.0 && ratio > 1.0 + cfg_.clip_ratio) ||
                                         (adv < 0.0 && ratio < 1.0 - cfg_.clip_ratio));
                head_.log_prob_grad(raw, log_sigma, a_n, dlp, dlp_ls);
                head_.entropy_grad(raw, log_sigma, dent, dent_ls);
                const double pg_coef = pg_active ? -adv * ratio * inv_count : 0.0;
                d_raw.row(r) = pg_coef * dlp - cfg_.entropy_coef * inv_count * dent;
                if (ls_dim > 0) {
                    d_log_sigma_acc +=
                        pg_coef * dlp_ls - cfg_.entropy_coef * inv_count * dent_ls;
                }
            }
            net_.zero_grad();
            net_.backward(fwd, d_raw, d_value);
            for (int i = 0; i < ls_dim; ++i) net_.add_log_sigma_grad(i, d_log_sigma_acc[i]);
            const double gnorm = clip_grad_norm(net_.grads(), cfg_.max_grad_norm);
            if (!std::isfinite(gnorm)) return false;
            opt_.step(net_.params(), net_.grads());
            gnorm_sum += gnorm;
            samples += static_cast<std::uint64_t>(count);
            ++batches;
        }
    }
    stats.policy_loss = pg_sum / static_cast<double>(samples);
    stats.value_loss = v_sum / static_cast<double>(samples);
    stats.entropy = ent_sum / static_cast<double>(samples);
    stats.clip_fraction = static_cast<double>(clip_count) / static_cast<double>(samples);
    stats.approx_kl = kl_sum / static_cast<double>(samples);
    stats.grad_norm = gnorm_sum / static_cast<double>(batches);
    stats.samples = samples;
    stats.batches = batches;
    return true;
}

void Trainer::assert_policy_invariants() const {
    if (!net_.params().allFinite()) {
        throw NumericalFailure("trainer: non-finite network parameters after update");
    }
    if (head_.kind() == DistributionKind::Beta) {
        // Probe the concentration floor at a representative input.
        Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, kObsDim);
        const MlpActorCritic::Forward fwd = net_.forward(x);
        for (int i = 0; i < kNumActuated; ++i) {
            const BetaParams p = beta_from_raw(fwd.actor_raw(0, i),
                                               fwd.actor_raw(0, kNumActuated + i));
            if (!(p.alpha > 1.0 && p.beta > 1.0)) {
                throw NumericalFailure("trainer: concentration parameters left (1, inf)");
            }
        }
    }
}

UpdateMetrics Trainer::run_update() {
    const auto t0 = std::chrono::steady_clock::now();
    UpdateMetrics m;
    m.update = update_index_ + 1;

    RolloutBuffer buffer(cfg_.n_envs, cfg_.rollout_len, kObsDim, kNumActuated);
    collect_rollout(buffer, m);
    sim_steps_ += sim_steps_per_update();
    transitions_ += static_cast<std::uint64_t>(cfg_.n_envs) *
                    static_cast<std::uint64_t>(cfg_.rollout_len);

    buffer.compute_gae(cfg_.gamma, cfg_.gae_lambda);
    buffer.normalize_advantages();

    const Eigen::VectorXd params_snapshot = net_.params();
    const AdamOptimizer opt_snapshot = opt_;

    EpochStats stats;
    if (optimize(buffer, stats)) {
        consecutive_nonfinite_ = 0;
        m.policy_loss = stats.policy_loss;
        m.value_loss = stats.value_loss;
        m.entropy = stats.entropy;
        m.clip_fraction = stats.clip_fraction;
        m.approx_kl = stats.approx_kl;
        m.grad_norm = stats.grad_norm;
    } else {
        // Non-finite quantities encountered: roll the update back entirely.
        net_.params() = params_snapshot;
        opt_ = opt_snapshot;
        ++consecutive_nonfinite_;
        m.policy_loss = kNaN;
        m.value_loss = kNaN;
        m.entropy = kNaN;
        m.clip_fraction = kNaN;
        m.approx_kl = kNaN;
        m.grad_norm = kNaN;
        if (consecutive_nonfinite_ >= 3) {
            throw NumericalFailure("trainer: three consecutive non-finite updates");
        }
    }
    assert_policy_invariants();

    ++update_index_;
    m.sim_steps = sim_steps_;
    m.transitions = transitions_;
    digest_ = fnv1a64(m.digest_line(), digest_);

    const auto t1 = std::chrono::steady_clock::now();
    m.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
    m.steps_per_sec = m.wall_time_s > 0.0
                          ? static_cast<double>(sim_steps_per_update()) / m.wall_time_s
                          : 0.0;
    return m;
}

TrainSummary run_training(Trainer& trainer, const TrainPaths& paths, bool verbose,
                          const std::function<void(const UpdateMetrics&)>& on_update) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(paths.log_dir, ec);
    fs::create_directories(paths.checkpoint_dir, ec);

    const std::string metrics_path = paths.log_dir + "/metrics.jsonl";
    std::ofstream metrics(metrics_path, std::ios::app);
    if (!metrics) throw IoError("cannot open metrics log: " + metrics_path);

    TrainSummary summary;
    while (!trainer.finished()) {
        const UpdateMetrics m = trainer.run_update();
        metrics << m.jsonl() << '\n';
        metrics.flush();
        if (!metrics) throw IoError("failed writing metrics log: " + metrics_path);
        if (verbose) {
            std::printf("update %4d  steps %10llu  ep_reward %8.3f  ep_len %7.1f  "
                        "entropy %7.3f  clip %5.3f\n",
                        m.update, static_cast<unsigned long long>(m.sim_steps),
                        m.ep_reward_mean, m.ep_len_mean, m.entropy, m.clip_fraction);
            std::fflush(stdout);
        }
        if (on_update) on_update(m);
        if (trainer.config().checkpoint_interval > 0 &&
            trainer.update_index() % trainer.config().checkpoint_interval == 0) {
            char name[64];
            std::snprintf(name, sizeof(name), "/update_%06d.ckpt", trainer.update_index());
            trainer.save_checkpoint(paths.checkpoint_dir + name);
        }
    }
    summary.final_checkpoint = paths.checkpoint_dir + "/final.ckpt";
    trainer.save_checkpoint(summary.final_checkpoint);
    summary.updates = trainer.update_index();
    summary.sim_steps = trainer.sim_steps();
    summary.transitions = trainer.transitions();
    summary.metrics_digest = trainer.metrics_digest();
    return summary;
}

}  // namespace crane
