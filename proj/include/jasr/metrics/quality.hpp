#pragma once

#include <jasr/core/error.hpp>
#include <jasr/core/tensor.hpp>
#include <jasr/data/landmarks.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace jasr {

inline constexpr double kPsnrCapDb = 100.0;

/// Half-open integer pixel rectangle [x0, x1) x [y0, y1).
struct PixelRegion {
    std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    std::size_t width() const { return x1 > x0 ? x1 - x0 : 0; }
    std::size_t height() const { return y1 > y0 ? y1 - y0 : 0; }
    bool empty() const { return width() == 0 || height() == 0; }

    /// Pixels touched by a continuous box, clipped to a w x h image.
    static PixelRegion covering(const FaceBox& b, std::size_t w, std::size_t h) {
        auto lo = [](double v, std::size_t n) { return static_cast<std::size_t>(std::clamp(std::floor(v), 0.0, double(n))); };
        auto hi = [](double v, std::size_t n) { return static_cast<std::size_t>(std::clamp(std::ceil(v), 0.0, double(n))); };
        return {lo(b.x0, w), lo(b.y0, h), hi(b.x1, w), hi(b.y1, h)};
    }
    static PixelRegion full(std::size_t w, std::size_t h) { return {0, 0, w, h}; }
};

/// BT.601 luma of an RGB image in [0, 1]: Y = 16/255 + (65.481 R + 128.553 G + 24.966 B) / 255.
/// Returns a 1 x H x W map in [16/255, 235/255].
template <class T>
Tensor<double> rgb_to_luma(const Tensor<T>& rgb) {
    if (rgb.rank() != 3 || rgb.channels() != 3) throw ShapeError("rgb_to_luma expects 3 x H x W");
    const std::size_t h = rgb.height(), w = rgb.width();
    Tensor<double> y({1, h, w});
    for (std::size_t i = 0; i < h * w; ++i)
        y[i] = (16.0 + 65.481 * double(rgb.plane(0)[i]) + 128.553 * double(rgb.plane(1)[i]) +
                24.966 * double(rgb.plane(2)[i])) /
               255.0;
    return y;
}

/// PSNR of the luma channel on the 0-255 scale, restricted to `region`.
/// Zero error reports the 100 dB cap.
template <class T>
double psnr_y(const Tensor<T>& pred, const Tensor<T>& target, const PixelRegion& region) {
    pred.check_same_shape(target, "psnr_y");
    if (region.empty()) throw ConfigError("PSNR region is empty");
    if (region.x1 > pred.width() || region.y1 > pred.height()) throw ShapeError("PSNR region exceeds the image");
    const Tensor<double> a = rgb_to_luma(pred), b = rgb_to_luma(target);
    double se = 0.0;
    for (std::size_t y = region.y0; y < region.y1; ++y)
        for (std::size_t x = region.x0; x < region.x1; ++x) {
            const double d = 255.0 * (a.at(0, y, x) - b.at(0, y, x));
            se += d * d;
        }
    const double mse = se / static_cast<double>(region.width() * region.height());
    if (mse == 0.0) return kPsnrCapDb;
    return std::min(kPsnrCapDb, 10.0 * std::log10(255.0 * 255.0 / mse));
}

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01, k2 = 0.03;
    double peak = 255.0;
};

/// Normalized 1D Gaussian taps.
inline std::vector<double> gaussian_taps(int n, double sigma) {
    std::vector<double> g(static_cast<std::size_t>(n));
    const double c = 0.5 * (n - 1);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += g[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    for (auto& v : g) v /= s;
    return g;
}

/// Mean SSIM over every Gaussian window lying entirely inside `region`.
/// Inputs are single-channel maps (1 x H x W) on the `peak` scale.
inline double ssim(const Tensor<double>& a, const Tensor<double>& b, const PixelRegion& region,
                   const SsimOptions& opt = {}) {
    a.check_same_shape(b, "ssim");
    const std::size_t n = static_cast<std::size_t>(opt.window);
    if (region.width() < n || region.height() < n)
        throw ConfigError("SSIM region " + std::to_string(region.width()) + "x" + std::to_string(region.height()) +
                          " is smaller than the " + std::to_string(n) + "x" + std::to_string(n) + " window");
    if (region.x1 > a.width() || region.y1 > a.height()) throw ShapeError("SSIM region exceeds the image");
    const double c1 = (opt.k1 * opt.peak) * (opt.k1 * opt.peak), c2 = (opt.k2 * opt.peak) * (opt.k2 * opt.peak);
    const auto g = gaussian_taps(opt.window, opt.sigma);
    const std::size_t ox = region.width() - n + 1, oy = region.height() - n + 1;

    // horizontal pass over the region rows, then vertical per window position
    std::vector<std::array<double, 5>> rows(region.height() * ox);
    for (std::size_t y = 0; y < region.height(); ++y)
        for (std::size_t x = 0; x < ox; ++x) {
            std::array<double, 5> s{};
            for (std::size_t k = 0; k < n; ++k) {
                const double va = a.at(0, region.y0 + y, region.x0 + x + k);
                const double vb = b.at(0, region.y0 + y, region.x0 + x + k);
                s[0] += g[k] * va;
                s[1] += g[k] * vb;
                s[2] += g[k] * va * va;
                s[3] += g[k] * vb * vb;
                s[4] += g[k] * va * vb;
            }
            rows[y * ox + x] = s;
        }
    double total = 0.0;
    for (std::size_t y = 0; y < oy; ++y)
        for (std::size_t x = 0; x < ox; ++x) {
            std::array<double, 5> s{};
            for (std::size_t k = 0; k < n; ++k)
                for (int j = 0; j < 5; ++j) s[j] += g[k] * rows[(y + k) * ox + x][j];
            const double ma = s[0], mb = s[1];
            const double va = s[2] - ma * ma, vb = s[3] - mb * mb, cov = s[4] - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    return total / static_cast<double>(ox * oy);
}

/// SSIM of the luma channels of two RGB images in [0, 1].
template <class T>
double ssim_y(const Tensor<T>& pred, const Tensor<T>& target, const PixelRegion& region) {
    Tensor<double> a = rgb_to_luma(pred), b = rgb_to_luma(target);
    for (auto& v : a.vec()) v *= 255.0;
    for (auto& v : b.vec()) v *= 255.0;
    return ssim(a, b, region);
}

}  // namespace jasr
