#pragma once

#include <jasr/core/error.hpp>
#include <jasr/core/tensor.hpp>
#include <jasr/data/landmarks.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace jasr {

/// Keys cubic convolution kernel; a = -0.5 reproduces quadratics.
inline double keys_kernel(double t, double a = -0.5) {
    t = std::abs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

/// Positive rational scale factor num/den.
struct Rational {
    long num = 1;
    long den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

namespace detail {

/// Per-output-index taps of a 1D resampling. `source(o)` is the continuous
/// source index sampled by output o; `kscale` < 1 widens the kernel to
/// antialias when shrinking.
struct AxisTaps {
    std::vector<std::size_t> offset;  // start into idx/weight for output o
    std::vector<std::size_t> count;
    std::vector<std::size_t> idx;
    std::vector<double> weight;
};

template <class SourceFn>
AxisTaps make_taps(std::size_t out_len, std::size_t in_len, double kscale, SourceFn source) {
    AxisTaps t;
    const double support = 2.0 / kscale;
    for (std::size_t o = 0; o < out_len; ++o) {
        const double c = source(o);
        const long lo = static_cast<long>(std::floor(c - support)) + 1;
        const long hi = static_cast<long>(std::floor(c + support));
        t.offset.push_back(t.idx.size());
        double sum = 0.0;
        const std::size_t first = t.weight.size();
        for (long i = lo; i <= hi; ++i) {
            const double w = keys_kernel((c - static_cast<double>(i)) * kscale);
            if (w == 0.0) continue;
            t.idx.push_back(static_cast<std::size_t>(std::clamp<long>(i, 0, static_cast<long>(in_len) - 1)));
            t.weight.push_back(w);
            sum += w;
        }
        for (std::size_t j = first; j < t.weight.size(); ++j) t.weight[j] /= sum;
        t.count.push_back(t.weight.size() - first);
    }
    return t;
}

/// Applies taps along x then along y.
template <class T>
Tensor<T> apply_separable(const Tensor<T>& img, const AxisTaps& tx, std::size_t out_w, const AxisTaps& ty,
                          std::size_t out_h) {
    const std::size_t c = img.channels(), h = img.height(), w = img.width();
    Tensor<T> mid({c, h, out_w});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y) {
            const T* row = img.plane(ch) + y * w;
            for (std::size_t o = 0; o < out_w; ++o) {
                double s = 0.0;
                for (std::size_t j = tx.offset[o]; j < tx.offset[o] + tx.count[o]; ++j) s += tx.weight[j] * row[tx.idx[j]];
                mid.at(ch, y, o) = static_cast<T>(s);
            }
        }
    Tensor<T> out({c, out_h, out_w});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t o = 0; o < out_h; ++o)
            for (std::size_t x = 0; x < out_w; ++x) {
                double s = 0.0;
                for (std::size_t j = ty.offset[o]; j < ty.offset[o] + ty.count[o]; ++j)
                    s += ty.weight[j] * mid.at(ch, ty.idx[j], x);
                out.at(ch, o, x) = static_cast<T>(s);
            }
    return out;
}

inline std::size_t scaled_length(std::size_t len, Rational f) {
    if (f.num <= 0 || f.den <= 0) throw ConfigError("resample factor must be positive");
    const long long p = static_cast<long long>(len) * f.num;
    if (p % f.den != 0)
        throw ShapeError("resample of length " + std::to_string(len) + " by " + std::to_string(f.num) + "/" +
                         std::to_string(f.den) + " is not integral");
    return static_cast<std::size_t>(p / f.den);
}

}  // namespace detail

/// Separable bicubic resampling (Keys, a = -0.5) with edge replication.
/// Pixel centers are aligned (source = (o + 0.5) / f - 0.5); when shrinking the
/// kernel is widened by 1/f. Weights are normalized so constants are preserved.
template <class T>
Tensor<T> bicubic_resample(const Tensor<T>& img, Rational factor) {
    const std::size_t ow = detail::scaled_length(img.width(), factor);
    const std::size_t oh = detail::scaled_length(img.height(), factor);
    const double f = factor.value();
    const double ks = std::min(1.0, f);
    auto src = [f](std::size_t o) { return (static_cast<double>(o) + 0.5) / f - 0.5; };
    return detail::apply_separable(img, detail::make_taps(ow, img.width(), ks, src), ow,
                                   detail::make_taps(oh, img.height(), ks, src), oh);
}

/// Maps original pixel coordinates into a crop: x' = sx * x + tx, y' = sy * y + ty.
struct CropTransform {
    double sx = 1, sy = 1, tx = 0, ty = 0;

    Point2 apply(Point2 p) const { return {sx * p.x + tx, sy * p.y + ty}; }
    LandmarkSet apply(const LandmarkSet& lm) const {
        LandmarkSet out;
        for (const auto& p : lm.points) out.points.push_back(apply(p));
        return out;
    }
};

struct CropResult {
    Tensor<float> image;
    CropTransform transform;
};

/// Crops the box and resizes it to out_size x out_size. Output pixel u samples
/// source x0 + u / sx, consistent with the returned landmark transform.
inline CropResult crop_and_resize(const Tensor<float>& img, const FaceBox& box, std::size_t out_size = 128) {
    if (!(box.width() > 0.0) || !(box.height() > 0.0)) throw ConfigError("degenerate crop box (zero area)");
    if (box.x1 <= 0.0 || box.y1 <= 0.0 || box.x0 >= static_cast<double>(img.width()) ||
        box.y0 >= static_cast<double>(img.height()))
        throw ConfigError("crop box does not intersect the image");
    CropTransform t;
    t.sx = static_cast<double>(out_size) / box.width();
    t.sy = static_cast<double>(out_size) / box.height();
    t.tx = -box.x0 * t.sx;
    t.ty = -box.y0 * t.sy;
    auto tx = detail::make_taps(out_size, img.width(), std::min(1.0, t.sx),
                                [&](std::size_t u) { return box.x0 + static_cast<double>(u) / t.sx; });
    auto ty = detail::make_taps(out_size, img.height(), std::min(1.0, t.sy),
                                [&](std::size_t v) { return box.y0 + static_cast<double>(v) / t.sy; });
    return {detail::apply_separable(img, tx, out_size, ty, out_size), t};
}

/// 2x3 affine map p' = A p + b.
struct Affine2 {
    double a = 1, b = 0, c = 0, d = 1, tx = 0, ty = 0;  // [a b; c d]

    Point2 apply(Point2 p) const { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }

    Affine2 inverse() const {
        const double det = a * d - b * c;
        if (det == 0.0) throw ConfigError("singular affine transform");
        Affine2 r{d / det, -b / det, -c / det, a / det, 0, 0};
        r.tx = -(r.a * tx + r.b * ty);
        r.ty = -(r.c * tx + r.d * ty);
        return r;
    }
};

/// Output pixel p samples the source at inverse(p) with a 4x4 Keys kernel and
/// edge replication. Integer sample positions reproduce source pixels exactly.
template <class T>
Tensor<T> warp_affine(const Tensor<T>& img, const Affine2& forward, std::size_t out_h, std::size_t out_w) {
    const Affine2 inv = forward.inverse();
    const std::size_t c = img.channels();
    const long h = static_cast<long>(img.height()), w = static_cast<long>(img.width());
    Tensor<T> out({c, out_h, out_w});
    for (std::size_t y = 0; y < out_h; ++y)
        for (std::size_t x = 0; x < out_w; ++x) {
            const Point2 s = inv.apply({static_cast<double>(x), static_cast<double>(y)});
            const long ix = static_cast<long>(std::floor(s.x)), iy = static_cast<long>(std::floor(s.y));
            std::array<double, 4> wx{}, wy{};
            std::array<long, 4> cx{}, cy{};
            for (int k = 0; k < 4; ++k) {
                cx[k] = std::clamp(ix - 1 + k, 0L, w - 1);
                cy[k] = std::clamp(iy - 1 + k, 0L, h - 1);
                wx[k] = keys_kernel(s.x - static_cast<double>(ix - 1 + k));
                wy[k] = keys_kernel(s.y - static_cast<double>(iy - 1 + k));
            }
            for (std::size_t ch = 0; ch < c; ++ch) {
                double v = 0.0;
                for (int j = 0; j < 4; ++j) {
                    const T* row = img.plane(ch) + cy[j] * w;
                    double r = 0.0;
                    for (int k = 0; k < 4; ++k) r += wx[k] * row[cx[k]];
                    v += wy[j] * r;
                }
                out.at(ch, y, x) = static_cast<T>(v);
            }
        }
    return out;
}

template <class T>
void clamp_unit(Tensor<T>& t) {
    for (auto& v : t.vec()) v = std::clamp(v, T(0), T(1));
}

}  // namespace jasr
