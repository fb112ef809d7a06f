#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace crane {

// Generalized advantage estimation over one trajectory segment. dones[t] = 1
// marks transition t as episode-terminal (no bootstrapping across it);
// bootstrap_value is V(s_{T}) for the truncated tail.
struct GaeResult {
    Eigen::VectorXd advantages;
    Eigen::VectorXd returns;
};
GaeResult compute_gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                      const Eigen::VectorXd& dones, double bootstrap_value, double gamma,
                      double lambda);

// Fixed-size on-policy rollout storage. Rows are laid out environment-major:
// row(e, t) = e * len + t, so each environment's segment is contiguous.
class RolloutBuffer {
public:
    RolloutBuffer(int n_envs, int len, int obs_dim, int act_dim);

    int n_envs() const { return n_envs_; }
    int len() const { return len_; }
    int size() const { return n_envs_ * len_; }
    int row(int env, int t) const { return env * len_ + t; }

    void set_step(int env, int t, const Eigen::VectorXd& obs, const Eigen::VectorXd& a_n,
                  double log_prob, double reward, double value, bool done,
                  std::uint8_t reason);
    void set_bootstrap(int env, double value) { bootstrap_values_[env] = value; }

    void compute_gae(double gamma, double lambda);
    // Standardize advantages in place (mean 0, std 1) across the whole buffer.
    void normalize_advantages(double denom_epsilon = 1e-8);

    const Eigen::MatrixXd& obs() const { return obs_; }
    const Eigen::MatrixXd& actions() const { return actions_; }
    const Eigen::VectorXd& log_probs() const { return log_probs_; }
    const Eigen::VectorXd& rewards() const { return rewards_; }
    const Eigen::VectorXd& values() const { return values_; }
    const Eigen::VectorXd& dones() const { return dones_; }
    const std::vector<std::uint8_t>& reasons() const { return reasons_; }
    const Eigen::VectorXd& bootstrap_values() const { return bootstrap_values_; }
    const Eigen::VectorXd& advantages() const { return advantages_; }
    const Eigen::VectorXd& returns() const { return returns_; }

private:
    int n_envs_, len_;
    Eigen::MatrixXd obs_;      // size() x obs_dim
    Eigen::MatrixXd actions_;  // size() x act_dim
    Eigen::VectorXd log_probs_, rewards_, values_, dones_;
    std::vector<std::uint8_t> reasons_;
    Eigen::VectorXd bootstrap_values_;  // n_envs
    Eigen::VectorXd advantages_, returns_;
};

}  // namespace crane
