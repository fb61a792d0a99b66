#pragma once

#include "pdef/decision.hpp"

#include <span>
#include <vector>

namespace pdef {

inline constexpr int kHiddenUnits = 256;

// One hidden tanh layer. Parameters are one flat array laid out as
// W1 (hidden x in, row-major), b1, W2 (out x hidden, row-major), b2.
class Mlp {
public:
    Mlp() = default;
    Mlp(int in, int out, int hidden = kHiddenUnits);

    static std::size_t param_count(int in, int hidden, int out);

    // Uniform in +-1/sqrt(fan_in) for weights, zero biases.
    void init(Rng& rng);

    struct Cache {
        std::vector<double> x;
        std::vector<double> h;  // post-activation
    };

    // Throws DomainError when x has the wrong size.
    std::vector<double> forward(std::span<const double> x, Cache* cache = nullptr) const;
    // Adds dL/dparams for one sample to `grad` given dL/doutput.
    void backward(const Cache& cache, std::span<const double> dout, std::vector<double>& grad) const;

    int in_dim() const { return in_; }
    int hidden_dim() const { return hidden_; }
    int out_dim() const { return out_; }

    std::vector<double> params;

    Json to_json() const;
    static Mlp from_json(const Json& j);

private:
    int in_ = 0;
    int hidden_ = 0;
    int out_ = 0;
};

class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}
    void step(std::vector<double>& params, const std::vector<double>& grad);
    double lr() const { return lr_; }

private:
    double lr_, b1_, b2_, eps_;
    std::vector<double> m_, v_;
    long t_ = 0;
};

std::vector<double> softmax(std::span<const double> logits);

}  // namespace pdef
