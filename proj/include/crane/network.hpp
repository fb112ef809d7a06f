#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "crane/rng.hpp"

namespace crane {

struct NetTopology {
    int obs_dim = 18;
    int hidden_size = 256;
    int hidden_depth = 4;
    int actor_dim = 12;
    int log_sigma_dim = 0;  // extra state-independent parameters (Gaussian head)

    bool operator==(const NetTopology& o) const = default;
    void validate() const;
};

// Actor-critic MLP: shared tanh trunk, linear actor and value heads. All
// parameters live in one flat vector (gradients mirror the layout), which
// keeps the optimizer, checkpointing, and gradient checks trivial.
class MlpActorCritic {
public:
    explicit MlpActorCritic(const NetTopology& topo);

    // Hidden and value layers: Xavier-uniform. Actor head: zeros, so the
    // initial policy is symmetric. log-sigma entries start at ln(0.5).
    void init_weights(RngStream& rng);

    int param_count() const { return static_cast<int>(params_.size()); }
    Eigen::VectorXd& params() { return params_; }
    const Eigen::VectorXd& params() const { return params_; }
    Eigen::VectorXd& grads() { return grads_; }
    const Eigen::VectorXd& grads() const { return grads_; }
    const NetTopology& topology() const { return topo_; }

    struct Forward {
        Eigen::MatrixXd x;                    // N x obs_dim
        std::vector<Eigen::MatrixXd> hidden;  // per layer, N x hidden_size
        Eigen::MatrixXd actor_raw;            // N x actor_dim
        Eigen::VectorXd value;                // N
    };
    Forward forward(const Eigen::MatrixXd& x) const;

    void zero_grad() { grads_.setZero(); }

    // Accumulates dL/dparams given dL/d(actor_raw) and dL/d(value).
    void backward(const Forward& f, const Eigen::MatrixXd& d_actor_raw,
                  const Eigen::VectorXd& d_value);

    double log_sigma(int i) const;
    Eigen::VectorXd log_sigma_vector() const;
    void add_log_sigma_grad(int i, double g);

    void serialize(std::ostream& os) const;
    void deserialize(std::istream& is);  // topology must match

private:
    struct Layer {
        int w_off = 0, b_off = 0, in = 0, out = 0;
    };
    using WMap = Eigen::Map<Eigen::MatrixXd>;
    using WMapC = Eigen::Map<const Eigen::MatrixXd>;
    using BMap = Eigen::Map<Eigen::VectorXd>;
    using BMapC = Eigen::Map<const Eigen::VectorXd>;

    WMapC weight(const Layer& l) const;
    BMapC bias(const Layer& l) const;
    WMap weight_grad(const Layer& l);
    BMap bias_grad(const Layer& l);

    NetTopology topo_;
    std::vector<Layer> hidden_layers_;
    Layer actor_head_, value_head_;
    int log_sigma_off_ = 0;
    Eigen::VectorXd params_, grads_;
};

// Rescales the gradient vector so its L2 norm is at most max_norm; returns
// the pre-clip norm.
double clip_grad_norm(Eigen::VectorXd& grads, double max_norm);

class AdamOptimizer {
public:
    AdamOptimizer(int param_count, double learning_rate, double beta1 = 0.9,
                  double beta2 = 0.999, double epsilon = 1e-8);

    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grads);
    std::int64_t steps_taken() const { return t_; }
    double learning_rate() const { return lr_; }

    void serialize(std::ostream& os) const;
    void deserialize(std::istream& is);

    bool operator==(const AdamOptimizer& o) const;

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    Eigen::VectorXd m_, v_;
};

}  // namespace crane
