#pragma once

#include <jasr/nn/autograd.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

namespace jasr::nn {

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are indexed like the parameter
/// list handed to step(), which must stay in the same order between calls.
template <class T>
class Adam {
public:
    explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

    /// Applies one update. grad_scale multiplies every gradient first (e.g. 1/batch).
    void step(const std::vector<Param<T>*>& params, const Tape<T>& tape, double lr, double grad_scale = 1.0) {
        if (m_.empty()) {
            m_.reserve(params.size());
            for (const Param<T>* p : params) {
                m_.emplace_back(p->value.shape());
                v_.emplace_back(p->value.shape());
            }
        }
        if (m_.size() != params.size()) throw ConfigError("Adam: parameter list changed between steps");
        ++t_;
        const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Param<T>& p = *params[i];
            const Tensor<T>* g = tape.find_grad(p);
            Tensor<T>& m = m_[i];
            Tensor<T>& v = v_[i];
            for (std::size_t j = 0; j < p.value.size(); ++j) {
                const double gj = g ? static_cast<double>((*g)[j]) * grad_scale : 0.0;
                const double mj = opts_.beta1 * static_cast<double>(m[j]) + (1.0 - opts_.beta1) * gj;
                const double vj = opts_.beta2 * static_cast<double>(v[j]) + (1.0 - opts_.beta2) * gj * gj;
                m[j] = static_cast<T>(mj);
                v[j] = static_cast<T>(vj);
                const double update = lr * (mj / bc1) / (std::sqrt(vj / bc2) + opts_.eps);
                p.value[j] = static_cast<T>(static_cast<double>(p.value[j]) - update);
            }
        }
    }

    std::uint64_t steps() const noexcept { return t_; }
    const std::vector<Tensor<T>>& first_moments() const noexcept { return m_; }
    const std::vector<Tensor<T>>& second_moments() const noexcept { return v_; }

    /// Restores state saved from first_moments()/second_moments()/steps().
    void restore(std::vector<Tensor<T>> m, std::vector<Tensor<T>> v, std::uint64_t t) {
        m_ = std::move(m);
        v_ = std::move(v);
        t_ = t;
    }

private:
    AdamOptions opts_;
    std::vector<Tensor<T>> m_, v_;
    std::uint64_t t_ = 0;
};

}  // namespace jasr::nn
