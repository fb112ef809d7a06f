#include "crane/policy.hpp"

#include <algorithm>
#include <cmath>

#include "crane/errors.hpp"

namespace crane {

const char* to_string(DistributionKind k) {
    switch (k) {
        case DistributionKind::Beta: return "beta";
        case DistributionKind::Gaussian: return "gaussian";
    }
    return "unknown";
}

ActionBounds ActionBounds::from_limits(const JointLimits& limits) {
    ActionBounds b;
    b.lo = -limits.max_speed;
    b.hi = limits.max_speed;
    for (int i = 0; i < kNumActuated; ++i) {
        if (!(b.hi[i] > b.lo[i])) {
            throw ConfigError("action bounds: max_speed must be positive per joint");
        }
    }
    return b;
}

ActuatedVector normalize_action(const ActuatedVector& a, const ActionBounds& b) {
    return (a - b.lo).cwiseQuotient(b.hi - b.lo);
}

ActuatedVector denormalize_action(const ActuatedVector& a_n, const ActionBounds& b) {
    return b.lo + a_n.cwiseProduct(b.hi - b.lo);
}

PolicyHead::PolicyHead(DistributionKind kind, int act_dim, double rpo_epsilon,
                       double boundary_eta)
    : kind_(kind), act_dim_(act_dim), rpo_epsilon_(rpo_epsilon), eta_(boundary_eta) {
    if (act_dim < 1) throw InvalidArgument("policy head: act_dim must be positive");
    if (rpo_epsilon < 0.0) throw InvalidArgument("policy head: rpo_epsilon must be >= 0");
}

int PolicyHead::actor_raw_dim() const {
    return kind_ == DistributionKind::Beta ? 2 * act_dim_ : act_dim_;
}

int PolicyHead::log_sigma_dim() const {
    return kind_ == DistributionKind::Gaussian ? act_dim_ : 0;
}

BetaParams PolicyHead::beta_at(const Eigen::Ref<const Eigen::RowVectorXd>& raw, int i) const {
    return beta_from_raw(raw[i], raw[act_dim_ + i]);
}

PolicyHead::SampledAction PolicyHead::sample(const Eigen::Ref<const Eigen::RowVectorXd>& raw,
                                             const Eigen::VectorXd& log_sigma, RngStream& rng,
                                             bool robust_perturbation) const {
    SampledAction out;
    if (kind_ == DistributionKind::Beta) {
        for (int i = 0; i < act_dim_; ++i) {
            double x = beta_sample(beta_at(raw, i), rng, eta_);
            if (robust_perturbation) {
                x = std::clamp(x + rng.uniform(-rpo_epsilon_, rpo_epsilon_), 0.0, 1.0);
            }
            out.a_n[i] = x;
        }
    } else {
        for (int i = 0; i < act_dim_; ++i) {
            double x = gaussian_sample(0.5 + raw[i], log_sigma[i], rng);
            if (robust_perturbation) {
                x += rng.uniform(-rpo_epsilon_, rpo_epsilon_);
            }
            out.a_n[i] = std::clamp(x, 0.0, 1.0);
        }
    }
    out.log_prob = log_prob(raw, log_sigma, out.a_n);
    return out;
}

double PolicyHead::log_prob(const Eigen::Ref<const Eigen::RowVectorXd>& raw,
                            const Eigen::VectorXd& log_sigma,
                            const ActuatedVector& a_n) const {
    double lp = 0.0;
    if (kind_ == DistributionKind::Beta) {
        for (int i = 0; i < act_dim_; ++i) {
            lp += beta_log_prob(a_n[i], beta_at(raw, i), eta_);
        }
    } else {
        for (int i = 0; i < act_dim_; ++i) {
            lp += gaussian_log_prob(a_n[i], 0.5 + raw[i], log_sigma[i]);
        }
    }
    return lp;
}

void PolicyHead::log_prob_grad(const Eigen::Ref<const Eigen::RowVectorXd>& raw,
                               const Eigen::VectorXd& log_sigma, const ActuatedVector& a_n,
                               Eigen::Ref<Eigen::RowVectorXd> d_raw,
                               Eigen::VectorXd& d_log_sigma) const {
    if (kind_ == DistributionKind::Beta) {
        for (int i = 0; i < act_dim_; ++i) {
            const BetaParams p = beta_at(raw, i);
            const BetaLogProbGrad g = beta_log_prob_grad(a_n[i], p, eta_);
            d_raw[i] = g.d_alpha * sigmoid(raw[i]);
            d_raw[act_dim_ + i] = g.d_beta * sigmoid(raw[act_dim_ + i]);
        }
    } else {
        for (int i = 0; i < act_dim_; ++i) {
            const GaussianLogProbGrad g =
                gaussian_log_prob_grad(a_n[i], 0.5 + raw[i], log_sigma[i]);
            d_raw[i] = g.d_mu;
            d_log_sigma[i] = g.d_log_sigma;
        }
    }
}

double PolicyHead::entropy(const Eigen::Ref<const Eigen::RowVectorXd>& raw,
                           const Eigen::VectorXd& log_sigma) const {
    double h = 0.0;
    if (kind_ == DistributionKind::Beta) {
        for (int i = 0; i < act_dim_; ++i) h += beta_entropy(beta_at(raw, i));
    } else {
        for (int i = 0; i < act_dim_; ++i) h += gaussian_entropy(log_sigma[i]);
    }
    return h;
}

void PolicyHead::entropy_grad(const Eigen::Ref<const Eigen::RowVectorXd>& raw,
                              const Eigen::VectorXd& log_sigma,
                              Eigen::Ref<Eigen::RowVectorXd> d_raw,
                              Eigen::VectorXd& d_log_sigma) const {
    (void)log_sigma;
    if (kind_ == DistributionKind::Beta) {
        for (int i = 0; i < act_dim_; ++i) {
            const BetaEntropyGrad g = beta_entropy_grad(beta_at(raw, i));
            d_raw[i] = g.d_alpha * sigmoid(raw[i]);
            d_raw[act_dim_ + i] = g.d_beta * sigmoid(raw[act_dim_ + i]);
        }
    } else {
        d_raw.setZero();
        for (int i = 0; i < act_dim_; ++i) d_log_sigma[i] = 1.0;
    }
}

ActuatedVector PolicyHead::mean_action(const Eigen::Ref<const Eigen::RowVectorXd>& raw,
                                       const Eigen::VectorXd& log_sigma) const {
    (void)log_sigma;
    ActuatedVector a;
    if (kind_ == DistributionKind::Beta) {
        for (int i = 0; i < act_dim_; ++i) a[i] = beta_mean(beta_at(raw, i));
    } else {
        for (int i = 0; i < act_dim_; ++i) a[i] = std::clamp(0.5 + raw[i], 0.0, 1.0);
    }
    return a;
}

}  // namespace crane
