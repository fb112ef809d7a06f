#pragma once

#include "crane/rng.hpp"

namespace crane {

// Special functions on the positive half line (all callers use x > 1, but the
// implementations are accurate for any x > 0).
double digamma(double x);
double trigamma(double x);
double log_beta(double alpha, double beta);

double softplus(double x);
double sigmoid(double x);

// ---------------------------------------------------------------------------
// Beta distribution on (0, 1), parameterized with alpha, beta > 1.
// ---------------------------------------------------------------------------

struct BetaParams {
    double alpha = 2.0;
    double beta = 2.0;
};

// Head activation: alpha = 1 + softplus(raw), strictly > 1 (unimodal density).
BetaParams beta_from_raw(double raw_alpha, double raw_beta);

// log p(x; alpha, beta); x is clamped into [eta, 1 - eta] before evaluation so
// boundary samples stay finite.
double beta_log_prob(double x, const BetaParams& p, double eta = 1e-6);

struct BetaLogProbGrad {
    double d_alpha = 0.0;
    double d_beta = 0.0;
};
BetaLogProbGrad beta_log_prob_grad(double x, const BetaParams& p, double eta = 1e-6);

double beta_mean(const BetaParams& p);
double beta_entropy(const BetaParams& p);

struct BetaEntropyGrad {
    double d_alpha = 0.0;
    double d_beta = 0.0;
};
BetaEntropyGrad beta_entropy_grad(const BetaParams& p);

// Draw via two Gamma variates; result clamped into (eta, 1 - eta).
double beta_sample(const BetaParams& p, RngStream& rng, double eta = 1e-6);

// ---------------------------------------------------------------------------
// Diagonal Gaussian on the normalized action cube (used by the baseline head).
// ---------------------------------------------------------------------------

double gaussian_log_prob(double x, double mu, double log_sigma);

struct GaussianLogProbGrad {
    double d_mu = 0.0;
    double d_log_sigma = 0.0;
};
GaussianLogProbGrad gaussian_log_prob_grad(double x, double mu, double log_sigma);

double gaussian_entropy(double log_sigma);
double gaussian_sample(double mu, double log_sigma, RngStream& rng);

}  // namespace crane
