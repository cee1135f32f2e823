#pragma once

#include <jasr/data/heatmaps.hpp>
#include <jasr/data/landmarks.hpp>
#include <jasr/data/resample.hpp>

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace jasr {

inline constexpr std::size_t kHrSize = 128;
inline constexpr long kSrFactor = 8;

/// One training/evaluation record. Images are 3 x S x S in [0, 1].
struct FaceSample {
    std::string id;
    Tensor<float> hr_image;
    Tensor<float> lr_input;  ///< S/8 bicubic downsample re-upsampled to S
    LandmarkSet landmarks;   ///< HR pixel coordinates
    Tensor<float> target_heatmaps;
    std::vector<std::uint8_t> visible;
    FaceBox face_box;

    std::size_t image_size() const { return hr_image.width(); }
    std::size_t num_landmarks() const { return landmarks.size(); }
};

/// Downsample 8x then upsample 8x (bicubic), clamped to [0, 1].
inline Tensor<float> synthesize_lr(const Tensor<float>& hr) {
    Tensor<float> lr = bicubic_resample(bicubic_resample(hr, {1, kSrFactor}), {kSrFactor, 1});
    clamp_unit(lr);
    return lr;
}

/// Tight landmark box expanded by 5% of its size on every side, clipped to [0, size].
inline FaceBox face_box_from_landmarks(const LandmarkSet& lm, double size) {
    FaceBox b = tight_box(lm);
    const double mx = 0.05 * b.width(), my = 0.05 * b.height();
    b.x0 = std::clamp(b.x0 - mx, 0.0, size);
    b.y0 = std::clamp(b.y0 - my, 0.0, size);
    b.x1 = std::clamp(b.x1 + mx, 0.0, size);
    b.y1 = std::clamp(b.y1 + my, 0.0, size);
    return b;
}

/// Derives LR input, heatmap targets and face box from an HR crop and its landmarks.
inline FaceSample make_sample(std::string id, Tensor<float> hr, LandmarkSet landmarks,
                              double sigma = kDefaultHeatmapSigma) {
    if (hr.rank() != 3 || hr.channels() != 3 || hr.height() != hr.width() || hr.width() % 8)
        throw ShapeError("HR image must be 3 x S x S with S divisible by 8, got " + shape_str(hr.shape()));
    if (!landmarks.all_finite()) throw ConfigError("sample '" + id + "' has non-finite landmarks");
    FaceSample s;
    s.id = std::move(id);
    s.lr_input = synthesize_lr(hr);
    const double size = static_cast<double>(hr.width());
    auto targets = render_heatmaps(landmarks, hr.width() / 8, sigma);
    s.target_heatmaps = std::move(targets.maps);
    s.visible = std::move(targets.visible);
    s.face_box = face_box_from_landmarks(landmarks, size);
    s.hr_image = std::move(hr);
    s.landmarks = std::move(landmarks);
    return s;
}

}  // namespace jasr
