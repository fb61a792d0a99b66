#include "pdef/nn.hpp"

#include <algorithm>
#include <cmath>

namespace pdef {

Mlp::Mlp(int in, int out, int hidden) : in_(in), hidden_(hidden), out_(out) {
    if (in < 1 || out < 1 || hidden < 1) throw DomainError("layer sizes must be positive");
    params.assign(param_count(in, hidden, out), 0.0);
}

std::size_t Mlp::param_count(int in, int hidden, int out) {
    return static_cast<std::size_t>(in) * hidden + hidden + static_cast<std::size_t>(hidden) * out + out;
}

void Mlp::init(Rng& rng) {
    const std::size_t w1 = static_cast<std::size_t>(in_) * hidden_;
    const std::size_t b1 = w1 + hidden_;
    const std::size_t w2 = b1 + static_cast<std::size_t>(hidden_) * out_;
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in_));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i < w1) {
            params[i] = s1 * (2.0 * rng.uniform() - 1.0);
        } else if (i >= b1 && i < w2) {
            params[i] = s2 * (2.0 * rng.uniform() - 1.0);
        } else {
            params[i] = 0.0;
        }
    }
}

std::vector<double> Mlp::forward(std::span<const double> x, Cache* cache) const {
    if (static_cast<int>(x.size()) != in_) {
        throw DomainError("input has " + std::to_string(x.size()) + " values, network expects " + std::to_string(in_));
    }
    const double* W1 = params.data();
    const double* b1 = W1 + static_cast<std::size_t>(in_) * hidden_;
    const double* W2 = b1 + hidden_;
    const double* b2 = W2 + static_cast<std::size_t>(hidden_) * out_;
    std::vector<double> h(static_cast<std::size_t>(hidden_));
    for (int j = 0; j < hidden_; ++j) {
        double z = b1[j];
        const double* row = W1 + static_cast<std::size_t>(j) * in_;
        for (int i = 0; i < in_; ++i) z += row[i] * x[static_cast<std::size_t>(i)];
        h[static_cast<std::size_t>(j)] = std::tanh(z);
    }
    std::vector<double> y(static_cast<std::size_t>(out_));
    for (int k = 0; k < out_; ++k) {
        double z = b2[k];
        const double* row = W2 + static_cast<std::size_t>(k) * hidden_;
        for (int j = 0; j < hidden_; ++j) z += row[j] * h[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(k)] = z;
    }
    if (cache != nullptr) {
        cache->x.assign(x.begin(), x.end());
        cache->h = std::move(h);
    }
    return y;
}

void Mlp::backward(const Cache& cache, std::span<const double> dout, std::vector<double>& grad) const {
    if (static_cast<int>(dout.size()) != out_ || static_cast<int>(cache.x.size()) != in_) {
        throw DomainError("gradient shape does not match the network");
    }
    if (grad.size() != params.size()) grad.assign(params.size(), 0.0);
    const std::size_t oW1 = 0;
    const std::size_t ob1 = static_cast<std::size_t>(in_) * hidden_;
    const std::size_t oW2 = ob1 + hidden_;
    const std::size_t ob2 = oW2 + static_cast<std::size_t>(hidden_) * out_;
    const double* W2 = params.data() + oW2;
    std::vector<double> dh(static_cast<std::size_t>(hidden_), 0.0);
    for (int k = 0; k < out_; ++k) {
        const double g = dout[static_cast<std::size_t>(k)];
        if (g == 0.0) continue;
        grad[ob2 + k] += g;
        const std::size_t row = oW2 + static_cast<std::size_t>(k) * hidden_;
        for (int j = 0; j < hidden_; ++j) {
            grad[row + j] += g * cache.h[static_cast<std::size_t>(j)];
            dh[static_cast<std::size_t>(j)] += g * W2[static_cast<std::size_t>(k) * hidden_ + j];
        }
    }
    for (int j = 0; j < hidden_; ++j) {
        const double hj = cache.h[static_cast<std::size_t>(j)];
        const double dz = dh[static_cast<std::size_t>(j)] * (1.0 - hj * hj);
        if (dz == 0.0) continue;
        grad[ob1 + j] += dz;
        const std::size_t row = oW1 + static_cast<std::size_t>(j) * in_;
        for (int i = 0; i < in_; ++i) grad[row + i] += dz * cache.x[static_cast<std::size_t>(i)];
    }
}

Json Mlp::to_json() const { return {{"in", in_}, {"hidden", hidden_}, {"out", out_}, {"params", params}}; }

Mlp Mlp::from_json(const Json& j) {
    Mlp m(j.at("in").get<int>(), j.at("out").get<int>(), j.at("hidden").get<int>());
    auto p = j.at("params").get<std::vector<double>>();
    if (p.size() != m.params.size()) throw DomainError("parameter count does not match the layer sizes");
    m.params = std::move(p);
    return m;
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad) {
    if (grad.size() != params.size()) throw DomainError("gradient and parameter sizes differ");
    if (m_.size() != params.size()) {
        m_.assign(params.size(), 0.0);
        v_.assign(params.size(), 0.0);
        t_ = 0;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
        v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
        params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.begin(), logits.end());
    if (p.empty()) return p;
    const double mx = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (auto& v : p) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : p) v /= sum;
    return p;
}

}  // namespace pdef
