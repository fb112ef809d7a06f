#include "crane/buffer.hpp"

#include <cmath>

#include "crane/errors.hpp"

namespace crane {

GaeResult compute_gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                      const Eigen::VectorXd& dones, double bootstrap_value, double gamma,
                      double lambda) {
    const Eigen::Index n = rewards.size();
    if (values.size() != n || dones.size() != n) {
        throw InvalidArgument("compute_gae: input length mismatch");
    }
    GaeResult out;
    out.advantages = Eigen::VectorXd::Zero(n);
    out.returns = Eigen::VectorXd::Zero(n);
    double gae = 0.0;
    for (Eigen::Index t = n - 1; t >= 0; --t) {
        const double nonterminal = 1.0 - dones[t];
        const double next_value = (t == n - 1) ? bootstrap_value : values[t + 1];
        const double delta = rewards[t] + gamma * next_value * nonterminal - values[t];
        gae = delta + gamma * lambda * nonterminal * gae;
        out.advantages[t] = gae;
        out.returns[t] = gae + values[t];
    }
    return out;
}

RolloutBuffer::RolloutBuffer(int n_envs, int len, int obs_dim, int act_dim)
    : n_envs_(n_envs), len_(len) {
    if (n_envs < 1 || len < 1 || obs_dim < 1 || act_dim < 1) {
        throw InvalidArgument("rollout buffer: all dimensions must be positive");
    }
    const int n = n_envs * len;
    obs_ = Eigen::MatrixXd::Zero(n, obs_dim);
    actions_ = Eigen::MatrixXd::Zero(n, act_dim);
    log_probs_ = Eigen::VectorXd::Zero(n);
    rewards_ = Eigen::VectorXd::Zero(n);
    values_ = Eigen::VectorXd::Zero(n);
    dones_ = Eigen::VectorXd::Zero(n);
    reasons_.assign(static_cast<std::size_t>(n), 255);
    bootstrap_values_ = Eigen::VectorXd::Zero(n_envs);
    advantages_ = Eigen::VectorXd::Zero(n);
    returns_ = Eigen::VectorXd::Zero(n);
}

void RolloutBuffer::set_step(int env, int t, const Eigen::VectorXd& obs,
                             const Eigen::VectorXd& a_n, double log_prob, double reward,
                             double value, bool done, std::uint8_t reason) {
    if (env < 0 || env >= n_envs_ || t < 0 || t >= len_) {
        throw InvalidArgument("rollout buffer: step index out of range");
    }
    const int r = row(env, t);
    obs_.row(r) = obs.transpose();
    actions_.row(r) = a_n.transpose();
    log_probs_[r] = log_prob;
    rewards_[r] = reward;
    values_[r] = value;
    dones_[r] = done ? 1.0 : 0.0;
    reasons_[static_cast<std::size_t>(r)] = reason;
}

void RolloutBuffer::compute_gae(double gamma, double lambda) {
    for (int e = 0; e < n_envs_; ++e) {
        const int base = row(e, 0);
        const GaeResult r = crane::compute_gae(
            rewards_.segment(base, len_), values_.segment(base, len_),
            dones_.segment(base, len_), bootstrap_values_[e], gamma, lambda);
        advantages_.segment(base, len_) = r.advantages;
        returns_.segment(base, len_) = r.returns;
    }
}

void RolloutBuffer::normalize_advantages(double denom_epsilon) {
    const double mean = advantages_.mean();
    const double var = (advantages_.array() - mean).square().mean();
    advantages_ = (advantages_.array() - mean) / (std::sqrt(var) + denom_epsilon);
}

}  // namespace crane
