#pragma once

#include <jasr/core/error.hpp>
#include <jasr/core/tensor.hpp>
#include <jasr/data/landmarks.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

namespace jasr {

/// HR pixels per heatmap cell (three 2x halvings).
inline constexpr double kHeatmapStride = 8.0;
inline constexpr double kDefaultHeatmapSigma = 1.5;

struct HeatmapTargets {
    Tensor<float> maps;                 ///< K x grid x grid, peak 1
    std::vector<std::uint8_t> visible;  ///< 0 for landmarks outside the grid
};

/// Unnormalized Gaussian targets. Cell (u, v) holds
/// exp(-((u + 0.5 - x/8)^2 + (v + 0.5 - y/8)^2) / (2 sigma^2)), u along x.
/// Landmarks outside the grid get an all-zero map and visible = 0.
inline HeatmapTargets render_heatmaps(const LandmarkSet& lm, std::size_t grid = 16,
                                      double sigma = kDefaultHeatmapSigma, double stride = kHeatmapStride) {
    if (!(sigma > 0.0)) throw ConfigError("heatmap sigma must be positive");
    HeatmapTargets out{Tensor<float>({lm.size(), grid, grid}), std::vector<std::uint8_t>(lm.size(), 0)};
    const double g = static_cast<double>(grid);
    for (std::size_t k = 0; k < lm.size(); ++k) {
        const double gx = lm[k].x / stride, gy = lm[k].y / stride;
        if (!(gx >= 0.0 && gx < g && gy >= 0.0 && gy < g)) continue;
        out.visible[k] = 1;
        for (std::size_t v = 0; v < grid; ++v)
            for (std::size_t u = 0; u < grid; ++u) {
                const double dx = static_cast<double>(u) + 0.5 - gx;
                const double dy = static_cast<double>(v) + 0.5 - gy;
                out.maps.at(k, v, u) = static_cast<float>(std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)));
            }
    }
    return out;
}

/// Per-channel argmax (row-major scan, first maximum wins), mapped to the cell
/// center in HR pixels: ((u + 0.5) * 8, (v + 0.5) * 8).
template <class T>
LandmarkSet decode_heatmaps(const Tensor<T>& maps, double stride = kHeatmapStride) {
    if (maps.rank() != 3) throw ShapeError("heatmaps must be K x H x W, got " + shape_str(maps.shape()));
    const std::size_t h = maps.height(), w = maps.width();
    LandmarkSet out;
    for (std::size_t k = 0; k < maps.channels(); ++k) {
        const T* p = maps.plane(k);
        std::size_t best = 0;
        for (std::size_t i = 1; i < h * w; ++i)
            if (p[i] > p[best]) best = i;
        out.points.push_back({(static_cast<double>(best % w) + 0.5) * stride,
                              (static_cast<double>(best / w) + 0.5) * stride});
    }
    return out;
}

}  // namespace jasr
