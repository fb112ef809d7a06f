#include "crane/network.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "crane/binio.hpp"
#include "crane/errors.hpp"

namespace crane {

void NetTopology::validate() const {
    if (obs_dim < 1 || hidden_size < 1 || hidden_depth < 1 || actor_dim < 1 ||
        log_sigma_dim < 0) {
        throw ConfigError("network topology: all dimensions must be positive");
    }
}

MlpActorCritic::MlpActorCritic(const NetTopology& topo) : topo_(topo) {
    topo_.validate();
    int off = 0;
    auto add_layer = [&off](int in, int out) {
        Layer l;
        l.in = in;
        l.out = out;
        l.w_off = off;
        off += in * out;
        l.b_off = off;
        off += out;
        return l;
    };
    int in = topo_.obs_dim;
    for (int i = 0; i < topo_.hidden_depth; ++i) {
        hidden_layers_.push_back(add_layer(in, topo_.hidden_size));
        in = topo_.hidden_size;
    }
    actor_head_ = add_layer(in, topo_.actor_dim);
    value_head_ = add_layer(in, 1);
    log_sigma_off_ = off;
    off += topo_.log_sigma_dim;

    params_ = Eigen::VectorXd::Zero(off);
    grads_ = Eigen::VectorXd::Zero(off);
}

MlpActorCritic::WMapC MlpActorCritic::weight(const Layer& l) const {
    return WMapC(params_.data() + l.w_off, l.out, l.in);
}
MlpActorCritic::BMapC MlpActorCritic::bias(const Layer& l) const {
    return BMapC(params_.data() + l.b_off, l.out);
}
MlpActorCritic::WMap MlpActorCritic::weight_grad(const Layer& l) {
    return WMap(grads_.data() + l.w_off, l.out, l.in);
}
MlpActorCritic::BMap MlpActorCritic::bias_grad(const Layer& l) {
    return BMap(grads_.data() + l.b_off, l.out);
}

void MlpActorCritic::init_weights(RngStream& rng) {
    params_.setZero();
    auto xavier = [&](const Layer& l) {
        const double s = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
        double* w = params_.data() + l.w_off;
        for (int i = 0; i < l.in * l.out; ++i) w[i] = rng.uniform(-s, s);
        // biases stay zero
    };
    for (const Layer& l : hidden_layers_) xavier(l);
    xavier(value_head_);
    // actor head stays zero
    for (int i = 0; i < topo_.log_sigma_dim; ++i) {
        params_[log_sigma_off_ + i] = std::log(0.5);
    }
}

MlpActorCritic::Forward MlpActorCritic::forward(const Eigen::MatrixXd& x) const {
    if (x.cols() != topo_.obs_dim) {
        throw InvalidArgument("forward: input column count does not match obs_dim");
    }
    Forward f;
    f.x = x;
    f.hidden.reserve(hidden_layers_.size());
    const Eigen::MatrixXd* a = &f.x;
    for (const Layer& l : hidden_layers_) {
        Eigen::MatrixXd z = (*a) * weight(l).transpose();
        z.rowwise() += bias(l).transpose();
        f.hidden.push_back(z.array().tanh().matrix());
        a = &f.hidden.back();
    }
    f.actor_raw = (*a) * weight(actor_head_).transpose();
    f.actor_raw.rowwise() += bias(actor_head_).transpose();
    f.value = (*a) * weight(value_head_).transpose() +
              Eigen::VectorXd::Constant(a->rows(), bias(value_head_)[0]);
    return f;
}

void MlpActorCritic::backward(const Forward& f, const Eigen::MatrixXd& d_actor_raw,
                              const Eigen::VectorXd& d_value) {
    const int n_hidden = static_cast<int>(hidden_layers_.size());
    if (static_cast<int>(f.hidden.size()) != n_hidden ||
        d_actor_raw.rows() != f.x.rows() || d_value.size() != f.x.rows()) {
        throw InvalidArgument("backward: cache/gradient shape mismatch");
    }
    const Eigen::MatrixXd& last = f.hidden.back();

    weight_grad(actor_head_).noalias() += d_actor_raw.transpose() * last;
    bias_grad(actor_head_).noalias() += d_actor_raw.colwise().sum().transpose();
    weight_grad(value_head_).noalias() += d_value.transpose() * last;
    bias_grad(value_head_)[0] += d_value.sum();

    Eigen::MatrixXd d_h = d_actor_raw * weight(actor_head_);
    d_h.noalias() += d_value * weight(value_head_);

    for (int i = n_hidden - 1; i >= 0; --i) {
        const Layer& l = hidden_layers_[static_cast<std::size_t>(i)];
        const Eigen::MatrixXd& h = f.hidden[static_cast<std::size_t>(i)];
        const Eigen::MatrixXd d_z =
            (d_h.array() * (1.0 - h.array().square())).matrix();
        const Eigen::MatrixXd& input = (i == 0) ? f.x : f.hidden[static_cast<std::size_t>(i - 1)];
        weight_grad(l).noalias() += d_z.transpose() * input;
        bias_grad(l).noalias() += d_z.colwise().sum().transpose();
        if (i > 0) d_h = d_z * weight(l);
    }
}

double MlpActorCritic::log_sigma(int i) const {
    if (i < 0 || i >= topo_.log_sigma_dim) throw InvalidArgument("log_sigma: index out of range");
    return params_[log_sigma_off_ + i];
}

Eigen::VectorXd MlpActorCritic::log_sigma_vector() const {
    return params_.segment(log_sigma_off_, topo_.log_sigma_dim);
}

void MlpActorCritic::add_log_sigma_grad(int i, double g) {
    if (i < 0 || i >= topo_.log_sigma_dim) throw InvalidArgument("log_sigma grad: index out of range");
    grads_[log_sigma_off_ + i] += g;
}

void MlpActorCritic::serialize(std::ostream& os) const {
    binio::write_u32(os, static_cast<std::uint32_t>(topo_.obs_dim));
    binio::write_u32(os, static_cast<std::uint32_t>(topo_.hidden_size));
    binio::write_u32(os, static_cast<std::uint32_t>(topo_.hidden_depth));
    binio::write_u32(os, static_cast<std::uint32_t>(topo_.actor_dim));
    binio::write_u32(os, static_cast<std::uint32_t>(topo_.log_sigma_dim));
    binio::write_u64(os, static_cast<std::uint64_t>(params_.size()));
    for (Eigen::Index i = 0; i < params_.size(); ++i) binio::write_f64(os, params_[i]);
}

void MlpActorCritic::deserialize(std::istream& is) {
    NetTopology t;
    t.obs_dim = static_cast<int>(binio::read_u32(is));
    t.hidden_size = static_cast<int>(binio::read_u32(is));
    t.hidden_depth = static_cast<int>(binio::read_u32(is));
    t.actor_dim = static_cast<int>(binio::read_u32(is));
    t.log_sigma_dim = static_cast<int>(binio::read_u32(is));
    if (!(t == topo_)) throw ProtocolError("network restore: topology mismatch");
    const std::uint64_t n = binio::read_u64(is);
    if (n != static_cast<std::uint64_t>(params_.size())) {
        throw ProtocolError("network restore: parameter count mismatch");
    }
    for (Eigen::Index i = 0; i < params_.size(); ++i) params_[i] = binio::read_f64(is);
}

double clip_grad_norm(Eigen::VectorXd& grads, double max_norm) {
    const double norm = grads.norm();
    if (max_norm > 0.0 && norm > max_norm) {
        grads *= max_norm / norm;
    }
    return norm;
}

AdamOptimizer::AdamOptimizer(int param_count, double learning_rate, double beta1,
                             double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
    if (param_count < 1) throw InvalidArgument("adam: param_count must be positive");
    if (!(learning_rate > 0.0)) throw InvalidArgument("adam: learning rate must be positive");
    m_ = Eigen::VectorXd::Zero(param_count);
    v_ = Eigen::VectorXd::Zero(param_count);
}

void AdamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw InvalidArgument("adam step: size mismatch");
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grads;
    v_ = beta2_ * v_.array().matrix() + (1.0 - beta2_) * grads.array().square().matrix();
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -=
        lr_ * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + eps_);
}

void AdamOptimizer::serialize(std::ostream& os) const {
    binio::write_f64(os, lr_);
    binio::write_f64(os, beta1_);
    binio::write_f64(os, beta2_);
    binio::write_f64(os, eps_);
    binio::write_u64(os, static_cast<std::uint64_t>(t_));
    binio::write_u64(os, static_cast<std::uint64_t>(m_.size()));
    for (Eigen::Index i = 0; i < m_.size(); ++i) binio::write_f64(os, m_[i]);
    for (Eigen::Index i = 0; i < v_.size(); ++i) binio::write_f64(os, v_[i]);
}

void AdamOptimizer::deserialize(std::istream& is) {
    lr_ = binio::read_f64(is);
    beta1_ = binio::read_f64(is);
    beta2_ = binio::read_f64(is);
    eps_ = binio::read_f64(is);
    t_ = static_cast<std::int64_t>(binio::read_u64(is));
    const std::uint64_t n = binio::read_u64(is);
    if (n != static_cast<std::uint64_t>(m_.size())) {
        throw ProtocolError("adam restore: parameter count mismatch");
    }
    for (Eigen::Index i = 0; i < m_.size(); ++i) m_[i] = binio::read_f64(is);
    for (Eigen::Index i = 0; i < v_.size(); ++i) v_[i] = binio::read_f64(is);
}

bool AdamOptimizer::operator==(const AdamOptimizer& o) const {
    return lr_ == o.lr_ && beta1_ == o.beta1_ && beta2_ == o.beta2_ && eps_ == o.eps_ &&
           t_ == o.t_ && m_ == o.m_ && v_ == o.v_;
}

}  // namespace crane
