#pragma once

#include <jasr/core/error.hpp>
#include <jasr/core/tensor.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace jasr::nn {

/// Named trainable tensor. Gradients live on the Tape, not here, so a model
/// stays immutable while forward/backward run.
template <class T>
struct Param {
    std::string name;
    Tensor<T> value;
};

template <class T>
class Var {
public:
    struct Slot {
        Tensor<T> value;
        Tensor<T> grad;  // allocated on first accumulation
        bool tracked = false;
    };

    Var() = default;
    explicit Var(Tensor<T> value, bool tracked = false) : slot_(std::make_shared<Slot>()) {
        slot_->value = std::move(value);
        slot_->tracked = tracked;
    }

    const Tensor<T>& value() const { return slot_->value; }
    const Tensor<T>& grad() const { return slot_->grad; }
    bool tracked() const noexcept { return slot_ && slot_->tracked; }
    bool valid() const noexcept { return static_cast<bool>(slot_); }

    /// Adds g into this variable's gradient buffer.
    void accumulate(const Tensor<T>& g) const {
        if (slot_->grad.empty()) {
            slot_->grad = g;
        } else {
            slot_->grad += g;
        }
    }
    Tensor<T>& grad_buffer() const {
        if (slot_->grad.empty()) slot_->grad = Tensor<T>(slot_->value.shape());
        return slot_->grad;
    }

private:
    std::shared_ptr<Slot> slot_;
};

/// Records backward closures in execution order; replaying them in reverse is a
/// valid topological order because every op only reads earlier variables.
/// Parameter gradients accumulate across backward() calls until zero_grad().
template <class T>
class Tape {
public:
    void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }

    Tensor<T>& param_grad(const Param<T>& p) {
        auto [it, inserted] = grads_.try_emplace(&p);
        if (inserted) it->second = Tensor<T>(p.value.shape());
        return it->second;
    }

    /// Gradient for p, or nullptr when p received none.
    const Tensor<T>* find_grad(const Param<T>& p) const {
        auto it = grads_.find(&p);
        return it == grads_.end() ? nullptr : &it->second;
    }

    void backward(const Var<T>& scalar) {
        if (scalar.value().size() != 1) throw ShapeError("backward() requires a scalar");
        if (scalar.tracked()) {
            scalar.grad_buffer()[0] += T(1);
            for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
        }
        ops_.clear();
    }

    void zero_grad() { grads_.clear(); }
    void clear() {
        ops_.clear();
        grads_.clear();
    }

private:
    std::vector<std::function<void()>> ops_;
    std::unordered_map<const Param<T>*, Tensor<T>> grads_;
};

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::size_t conv_out(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// Valid output range [lo, hi) for one kernel tap along an axis: positions whose
// source index o * stride + tap - pad falls inside [0, n).
inline std::pair<std::size_t, std::size_t> tap_range(std::size_t n, std::size_t out, std::size_t tap,
                                                     std::size_t stride, std::size_t pad) {
    const long off = static_cast<long>(tap) - static_cast<long>(pad);
    const long s = static_cast<long>(stride);
    long lo = off >= 0 ? 0 : (-off + s - 1) / s;
    long hi = (static_cast<long>(n) - 1 - off) / s + 1;  // first o with o*s + off >= n
    if (static_cast<long>(n) - 1 - off < 0) hi = 0;
    lo = std::min<long>(lo, static_cast<long>(out));
    hi = std::clamp<long>(hi, lo, static_cast<long>(out));
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Reusable per-thread buffer; avoids page-faulting fresh multi-megabyte
// allocations on every convolution. slot 0: forward columns, 1-2: backward.
template <class T>
T* scratch(int slot, std::size_t n) {
    thread_local std::vector<T> buffers[3];
    auto& b = buffers[slot];
    if (b.size() < n) b.resize(n);
    return b.data();
}

// col layout: row = (c*k + ky)*k + kx, column = oy*wo + ox
template <class T>
void im2col(const Tensor<T>& x, std::size_t k, std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo,
            T* col) {
    const std::size_t c_in = x.channels(), h = x.height(), w = x.width();
    for (std::size_t c = 0; c < c_in; ++c) {
        const T* src = x.plane(c);
        for (std::size_t ky = 0; ky < k; ++ky) {
            const auto [ylo, yhi] = tap_range(h, ho, ky, stride, pad);
            for (std::size_t kx = 0; kx < k; ++kx) {
                const auto [xlo, xhi] = tap_range(w, wo, kx, stride, pad);
                T* dst = col + ((c * k + ky) * k + kx) * ho * wo;
                std::fill(dst, dst + ylo * wo, T{});
                for (std::size_t oy = ylo; oy < yhi; ++oy) {
                    const T* row = src + (oy * stride + ky - pad) * w;
                    T* out = dst + oy * wo;
                    std::fill(out, out + xlo, T{});
                    if (stride == 1) {
                        std::copy(row + xlo + kx - pad, row + xhi + kx - pad, out + xlo);
                    } else {
                        for (std::size_t ox = xlo; ox < xhi; ++ox) out[ox] = row[ox * stride + kx - pad];
                    }
                    std::fill(out + xhi, out + wo, T{});
                }
                std::fill(dst + yhi * wo, dst + ho * wo, T{});
            }
        }
    }
}

template <class T>
void col2im(const T* col, std::size_t k, std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo,
            Tensor<T>& dx) {
    const std::size_t c_in = dx.channels(), h = dx.height(), w = dx.width();
    for (std::size_t c = 0; c < c_in; ++c) {
        T* dst = dx.plane(c);
        for (std::size_t ky = 0; ky < k; ++ky) {
            const auto [ylo, yhi] = tap_range(h, ho, ky, stride, pad);
            for (std::size_t kx = 0; kx < k; ++kx) {
                const auto [xlo, xhi] = tap_range(w, wo, kx, stride, pad);
                const T* src = col + ((c * k + ky) * k + kx) * ho * wo;
                for (std::size_t oy = ylo; oy < yhi; ++oy) {
                    T* row = dst + (oy * stride + ky - pad) * w;
                    const T* in = src + oy * wo;
                    if (stride == 1) {
                        using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
                        const auto len = static_cast<Eigen::Index>(xhi - xlo);
                        Eigen::Map<Arr>(row + (xlo + kx - pad), len) += Eigen::Map<const Arr>(in + xlo, len);
                    } else {
                        for (std::size_t ox = xlo; ox < xhi; ++ox) row[ox * stride + kx - pad] += in[ox];
                    }
                }
            }
        }
    }
}

template <class T>
Var<T> make_result(Tensor<T> value, Tape<T>* tape, std::initializer_list<bool> inputs_tracked) {
    bool tracked = false;
    if (tape)
        for (bool b : inputs_tracked) tracked = tracked || b;
    return Var<T>(std::move(value), tracked);
}

}  // namespace detail

/// Square-kernel convolution with zero padding k/2. Weight shape (out, in, k, k),
/// bias shape (out). Parameters are always treated as tracked when a tape is given.
template <class T>
Var<T> conv2d(Tape<T>* tape, const Var<T>& x, const Param<T>& weight, const Param<T>& bias, std::size_t stride = 1) {
    using Mat = detail::RowMat<T>;
    const Tensor<T>& in = x.value();
    const Shape& ws = weight.value.shape();
    if (in.rank() != 3 || ws.size() != 4 || ws[1] != in.channels())
        throw ShapeError("conv2d '" + weight.name + "': input " + shape_str(in.shape()) + " vs weight " +
                         shape_str(ws));
    const std::size_t c_out = ws[0], k = ws[2], pad = k / 2;
    const std::size_t ho = detail::conv_out(in.height(), k, stride, pad);
    const std::size_t wo = detail::conv_out(in.width(), k, stride, pad);
    const std::size_t kdim = in.channels() * k * k, n = ho * wo;
    const bool direct = (k == 1 && stride == 1);

    Tensor<T> out({c_out, ho, wo});
    {
        const T* colp = in.data();
        if (!direct) {
            T* col = detail::scratch<T>(0, kdim * n);
            detail::im2col(in, k, stride, pad, ho, wo, col);
            colp = col;
        }
        Eigen::Map<const Mat> W(weight.value.data(), c_out, kdim);
        Eigen::Map<const Mat> C(colp, kdim, n);
        Eigen::Map<Mat> Y(out.data(), c_out, n);
        Y.noalias() = W * C;
        for (std::size_t o = 0; o < c_out; ++o) Y.row(o).array() += bias.value[o];
    }

    Var<T> y(std::move(out), tape != nullptr);
    if (tape) {
        tape->record([tape, x, y, &weight, &bias, stride, k, pad, ho, wo, kdim, n, c_out, direct] {
            if (y.grad().empty()) return;
            const Tensor<T>& in = x.value();
            Eigen::Map<const Mat> dY(y.grad().data(), c_out, n);
            const T* colp = in.data();
            if (!direct) {
                T* col = detail::scratch<T>(1, kdim * n);
                detail::im2col(in, k, stride, pad, ho, wo, col);
                colp = col;
            }
            Eigen::Map<const Mat> C(colp, kdim, n);
            Tensor<T>& gw = tape->param_grad(weight);
            Eigen::Map<Mat> dW(gw.data(), c_out, kdim);
            dW.noalias() += dY * C.transpose();
            Tensor<T>& gb = tape->param_grad(bias);
            // plain loop: Eigen's vectorized sum peels by address alignment,
            // which would make bias gradients depend on where buffers land
            for (std::size_t o = 0; o < c_out; ++o) {
                const T* row = y.grad().data() + o * n;
                T s{};
                for (std::size_t i = 0; i < n; ++i) s += row[i];
                gb[o] += s;
            }
            if (!x.tracked()) return;
            Eigen::Map<const Mat> W(weight.value.data(), c_out, kdim);
            Tensor<T>& dx = x.grad_buffer();
            if (direct) {
                Eigen::Map<Mat> dX(dx.data(), kdim, n);
                dX.noalias() += W.transpose() * dY;
            } else {
                T* dcol = detail::scratch<T>(2, kdim * n);
                Eigen::Map<Mat> dC(dcol, kdim, n);
                dC.noalias() = W.transpose() * dY;
                detail::col2im(dcol, k, stride, pad, ho, wo, dx);
            }
        });
    }
    return y;
}

template <class T>
Var<T> relu(Tape<T>* tape, const Var<T>& x) {
    Tensor<T> out = x.value();
    for (auto& v : out.vec()) v = v > T{} ? v : T{};
    Var<T> y = detail::make_result(std::move(out), tape, {x.tracked()});
    if (y.tracked()) {
        tape->record([x, y] {
            if (y.grad().empty()) return;
            Tensor<T>& dx = x.grad_buffer();
            const Tensor<T>& g = y.grad();
            const Tensor<T>& v = y.value();
            for (std::size_t i = 0; i < g.size(); ++i)
                if (v[i] > T{}) dx[i] += g[i];
        });
    }
    return y;
}

/// 2x2 max pooling, stride 2. Ties route the gradient to the first maximum in
/// row-major window order.
template <class T>
Var<T> maxpool2(Tape<T>* tape, const Var<T>& x) {
    const Tensor<T>& in = x.value();
    const std::size_t c = in.channels(), h = in.height(), w = in.width();
    if (h % 2 || w % 2) throw ShapeError("maxpool2 needs even spatial size, got " + shape_str(in.shape()));
    const std::size_t ho = h / 2, wo = w / 2;
    Tensor<T> out({c, ho, wo});
    std::vector<std::size_t> arg(out.size());
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox) {
                std::size_t best = (ch * h + 2 * oy) * w + 2 * ox;
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = (ch * h + 2 * oy + dy) * w + 2 * ox + dx;
                        if (in[idx] > in[best]) best = idx;
                    }
                const std::size_t o = (ch * ho + oy) * wo + ox;
                out[o] = in[best];
                arg[o] = best;
            }
    Var<T> y = detail::make_result(std::move(out), tape, {x.tracked()});
    if (y.tracked()) {
        tape->record([x, y, arg = std::move(arg)] {
            if (y.grad().empty()) return;
            Tensor<T>& dx = x.grad_buffer();
            const Tensor<T>& g = y.grad();
            for (std::size_t o = 0; o < g.size(); ++o) dx[arg[o]] += g[o];
        });
    }
    return y;
}

/// Index map of the 2x sub-pixel rearrangement: output (c, 2y+dy, 2x+dx) reads
/// input (4c + 2dy + dx, y, x).
inline std::size_t pixel_shuffle_source(std::size_t c, std::size_t oy, std::size_t ox, std::size_t h,
                                        std::size_t w) {
    const std::size_t y = oy / 2, dy = oy % 2, x = ox / 2, dx = ox % 2;
    return ((c * 4 + dy * 2 + dx) * h + y) * w + x;
}

template <class T>
Var<T> pixel_shuffle2(Tape<T>* tape, const Var<T>& x) {
    const Tensor<T>& in = x.value();
    if (in.channels() % 4) throw ShapeError("pixel_shuffle2 needs channels divisible by 4");
    const std::size_t c = in.channels() / 4, h = in.height(), w = in.width();
    Tensor<T> out({c, 2 * h, 2 * w});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t oy = 0; oy < 2 * h; ++oy)
            for (std::size_t ox = 0; ox < 2 * w; ++ox)
                out.at(ch, oy, ox) = in[pixel_shuffle_source(ch, oy, ox, h, w)];
    Var<T> y = detail::make_result(std::move(out), tape, {x.tracked()});
    if (y.tracked()) {
        tape->record([x, y, c, h, w] {
            if (y.grad().empty()) return;
            Tensor<T>& dx = x.grad_buffer();
            const Tensor<T>& g = y.grad();
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t oy = 0; oy < 2 * h; ++oy)
                    for (std::size_t ox = 0; ox < 2 * w; ++ox)
                        dx[pixel_shuffle_source(ch, oy, ox, h, w)] += g.at(ch, oy, ox);
        });
    }
    return y;
}

/// Channel concatenation of maps with equal spatial size.
template <class T>
Var<T> concat(Tape<T>* tape, const Var<T>& a, const Var<T>& b) {
    const Tensor<T>& va = a.value();
    const Tensor<T>& vb = b.value();
    if (va.height() != vb.height() || va.width() != vb.width())
        throw ShapeError("concat spatial mismatch: " + shape_str(va.shape()) + " vs " + shape_str(vb.shape()));
    Tensor<T> out({va.channels() + vb.channels(), va.height(), va.width()});
    std::copy(va.vec().begin(), va.vec().end(), out.vec().begin());
    std::copy(vb.vec().begin(), vb.vec().end(), out.vec().begin() + static_cast<std::ptrdiff_t>(va.size()));
    Var<T> y = detail::make_result(std::move(out), tape, {a.tracked(), b.tracked()});
    if (y.tracked()) {
        tape->record([a, b, y] {
            if (y.grad().empty()) return;
            const Tensor<T>& g = y.grad();
            const std::size_t na = a.value().size();
            if (a.tracked()) {
                Tensor<T>& da = a.grad_buffer();
                for (std::size_t i = 0; i < na; ++i) da[i] += g[i];
            }
            if (b.tracked()) {
                Tensor<T>& db = b.grad_buffer();
                for (std::size_t i = 0; i < db.size(); ++i) db[i] += g[na + i];
            }
        });
    }
    return y;
}

template <class T>
Var<T> add(Tape<T>* tape, const Var<T>& a, const Var<T>& b) {
    Tensor<T> out = a.value();
    out += b.value();
    Var<T> y = detail::make_result(std::move(out), tape, {a.tracked(), b.tracked()});
    if (y.tracked()) {
        tape->record([a, b, y] {
            if (y.grad().empty()) return;
            if (a.tracked()) a.grad_buffer() += y.grad();
            if (b.tracked()) b.grad_buffer() += y.grad();
        });
    }
    return y;
}

/// Mean absolute difference to a constant target; subgradient 0 at equality.
template <class T>
Var<T> l1_mean(Tape<T>* tape, const Var<T>& pred, const Tensor<T>& target) {
    pred.value().check_same_shape(target, "l1_mean");
    const std::size_t n = target.size();
    T s{};
    for (std::size_t i = 0; i < n; ++i) s += std::abs(pred.value()[i] - target[i]);
    Var<T> y = detail::make_result(Tensor<T>({1}, s / static_cast<T>(n)), tape, {pred.tracked()});
    if (y.tracked()) {
        tape->record([pred, y, target, n] {
            if (y.grad().empty()) return;
            const T g = y.grad()[0] / static_cast<T>(n);
            Tensor<T>& dp = pred.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                const T d = pred.value()[i] - target[i];
                dp[i] += d > T{} ? g : (d < T{} ? -g : T{});
            }
        });
    }
    return y;
}

/// Mean squared difference to a constant target.
template <class T>
Var<T> mse_mean(Tape<T>* tape, const Var<T>& pred, const Tensor<T>& target) {
    pred.value().check_same_shape(target, "mse_mean");
    const std::size_t n = target.size();
    T s{};
    for (std::size_t i = 0; i < n; ++i) {
        const T d = pred.value()[i] - target[i];
        s += d * d;
    }
    Var<T> y = detail::make_result(Tensor<T>({1}, s / static_cast<T>(n)), tape, {pred.tracked()});
    if (y.tracked()) {
        tape->record([pred, y, target, n] {
            if (y.grad().empty()) return;
            const T g = T(2) * y.grad()[0] / static_cast<T>(n);
            Tensor<T>& dp = pred.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) dp[i] += g * (pred.value()[i] - target[i]);
        });
    }
    return y;
}

/// sum_i coef_i * v_i over scalar variables.
template <class T>
Var<T> weighted_sum(Tape<T>* tape, const std::vector<std::pair<T, Var<T>>>& terms) {
    T s{};
    bool any = false;
    for (const auto& [c, v] : terms) {
        s += c * v.value()[0];
        any = any || v.tracked();
    }
    Var<T> y = detail::make_result(Tensor<T>({1}, s), tape, {any});
    if (y.tracked()) {
        tape->record([terms, y] {
            if (y.grad().empty()) return;
            for (const auto& [c, v] : terms)
                if (v.tracked()) v.grad_buffer()[0] += c * y.grad()[0];
        });
    }
    return y;
}

}  // namespace jasr::nn
