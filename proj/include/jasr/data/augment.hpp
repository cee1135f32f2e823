#pragma once

#include <jasr/core/rng.hpp>
#include <jasr/data/sample.hpp>

#include <cmath>
#include <numbers>
#include <vector>

namespace jasr {

struct AugmentationParams {
    double scale_min = 0.9, scale_max = 1.1;
    double rotation_min_deg = -30.0, rotation_max_deg = 30.0;
    double flip_probability = 0.5;
    int copies = 15;
    double heatmap_sigma = kDefaultHeatmapSigma;

    void validate() const {
        if (copies < 1) throw ConfigError("augmentation copies must be >= 1");
        if (!(scale_min > 0.0) || scale_max < scale_min) throw ConfigError("augmentation scale range must be positive");
        if (rotation_max_deg < rotation_min_deg) throw ConfigError("augmentation rotation range is empty");
        if (flip_probability < 0.0 || flip_probability > 1.0)
            throw ConfigError("flip probability must lie in [0, 1]");
    }
};

/// Similarity about the image center ((S-1)/2, (S-1)/2), optionally followed by
/// a horizontal mirror x <- (S-1) - x. Maps source pixel positions to output positions.
inline Affine2 augmentation_transform(std::size_t size, double scale, double rotation_deg, bool flip) {
    const double c = (static_cast<double>(size) - 1.0) / 2.0;
    const double th = rotation_deg * std::numbers::pi / 180.0;
    const double cs = scale * std::cos(th), sn = scale * std::sin(th);
    Affine2 t{cs, -sn, sn, cs, 0, 0};
    t.tx = c - (t.a * c + t.b * c);
    t.ty = c - (t.c * c + t.d * c);
    if (flip) {
        t.a = -t.a;
        t.b = -t.b;
        t.tx = 2.0 * c - t.tx;
    }
    return t;
}

/// Produces params.copies randomly transformed versions of the sample. Image and
/// landmarks share one transform; flips exchange landmark indices through the
/// profile's mirror map; LR input and heatmaps are regenerated from the new HR.
inline std::vector<FaceSample> augment(const FaceSample& sample, const AugmentationParams& params,
                                       const DatasetProfile& profile, Rng& rng) {
    params.validate();
    if (params.flip_probability > 0.0 && !profile.mirror)
        throw ConfigError("profile '" + profile.name + "' has no mirror permutation; set flip_probability to 0");
    const std::size_t size = sample.image_size();
    std::vector<FaceSample> out;
    out.reserve(static_cast<std::size_t>(params.copies));
    for (int i = 0; i < params.copies; ++i) {
        const double s = rng.uniform(params.scale_min, params.scale_max);
        const double r = rng.uniform(params.rotation_min_deg, params.rotation_max_deg);
        const bool flip = params.flip_probability > 0.0 && rng.bernoulli(params.flip_probability);
        const Affine2 t = augmentation_transform(size, s, r, flip);

        Tensor<float> hr = warp_affine(sample.hr_image, t, size, size);
        clamp_unit(hr);
        LandmarkSet lm;
        for (const auto& p : sample.landmarks.points) lm.points.push_back(t.apply(p));
        if (flip) {
            // positions are already mirrored; only the index exchange remains
            LandmarkSet swapped;
            for (std::size_t k = 0; k < lm.size(); ++k) swapped.points.push_back(lm[(*profile.mirror)[k]]);
            lm = std::move(swapped);
        }
        out.push_back(make_sample(sample.id + "#" + std::to_string(i), std::move(hr), std::move(lm),
                                  params.heatmap_sigma));
    }
    return out;
}

}  // namespace jasr
