#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "crane/distributions.hpp"
#include "crane/kinematics.hpp"
#include "crane/rng.hpp"

namespace crane {

enum class DistributionKind : std::uint8_t { Beta = 0, Gaussian = 1 };
const char* to_string(DistributionKind k);

// Map between physical velocity commands and the normalized action cube
// [0, 1]^6 the policy works in.
struct ActionBounds {
    ActuatedVector lo = ActuatedVector::Zero();
    ActuatedVector hi = ActuatedVector::Zero();

    static ActionBounds from_limits(const JointLimits& limits);
};

ActuatedVector normalize_action(const ActuatedVector& a, const ActionBounds& b);
ActuatedVector denormalize_action(const ActuatedVector& a_n, const ActionBounds& b);

// Interprets the actor head's raw outputs as a factorized distribution over
// the normalized action cube and provides log-probabilities, entropies, and
// their analytic gradients with respect to the raw outputs.
//
// Beta: raw layout [alpha_raw(0..d-1) | beta_raw(d..2d-1)], each dimension
//       Beta(1 + softplus, 1 + softplus).
// Gaussian: raw layout [mu_raw(0..d-1)], mean = 0.5 + mu_raw; per-dimension
//       log-sigma comes from the network's state-independent parameters.
//       Sampled actions are clipped into [0, 1] and log-probabilities are
//       always evaluated at the clipped (executed) action.
class PolicyHead {
public:
    PolicyHead(DistributionKind kind, int act_dim, double rpo_epsilon = 0.1,
               double boundary_eta = 1e-6);

    DistributionKind kind() const { return kind_; }
    int act_dim() const { return act_dim_; }
    int actor_raw_dim() const;
    int log_sigma_dim() const;
    double rpo_epsilon() const { return rpo_epsilon_; }

    struct SampledAction {
        ActuatedVector a_n = ActuatedVector::Zero();
        double log_prob = 0.0;
    };

    // Draws an action; with robust perturbation enabled the draw is jittered
    // uniformly and re-clipped before the stored log-probability is computed.
    SampledAction sample(const Eigen::Ref<const Eigen::RowVectorXd>& raw,
                         const Eigen::VectorXd& log_sigma, RngStream& rng,
                         bool robust_perturbation) const;

    double log_prob(const Eigen::Ref<const Eigen::RowVectorXd>& raw,
                    const Eigen::VectorXd& log_sigma, const ActuatedVector& a_n) const;

    // d(log_prob)/d(raw) into d_raw (row, actor_raw_dim) and
    // d(log_prob)/d(log_sigma) into d_log_sigma (log_sigma_dim; untouched for Beta).
    void log_prob_grad(const Eigen::Ref<const Eigen::RowVectorXd>& raw,
                       const Eigen::VectorXd& log_sigma, const ActuatedVector& a_n,
                       Eigen::Ref<Eigen::RowVectorXd> d_raw,
                       Eigen::VectorXd& d_log_sigma) const;

    double entropy(const Eigen::Ref<const Eigen::RowVectorXd>& raw,
                   const Eigen::VectorXd& log_sigma) const;

    void entropy_grad(const Eigen::Ref<const Eigen::RowVectorXd>& raw,
                      const Eigen::VectorXd& log_sigma,
                      Eigen::Ref<Eigen::RowVectorXd> d_raw,
                      Eigen::VectorXd& d_log_sigma) const;

    // Deterministic action for evaluation: Beta mean, or clipped Gaussian mean.
    ActuatedVector mean_action(const Eigen::Ref<const Eigen::RowVectorXd>& raw,
                               const Eigen::VectorXd& log_sigma) const;

private:
    BetaParams beta_at(const Eigen::Ref<const Eigen::RowVectorXd>& raw, int i) const;

    DistributionKind kind_;
    int act_dim_;
    double rpo_epsilon_;
    double eta_;
};

}  // namespace crane
