#pragma once

#include <jasr/core/error.hpp>
#include <jasr/data/landmarks.hpp>

#include <algorithm>
#include <cmath>

namespace jasr {

/// Mean point-to-point distance divided by `norm`, reported x100.
inline double nme_x100(const LandmarkSet& pred, const LandmarkSet& truth, double norm) {
    if (pred.size() != truth.size())
        throw ConfigError("NME landmark count mismatch: " + std::to_string(pred.size()) + " vs " +
                          std::to_string(truth.size()));
    if (truth.size() == 0) throw ConfigError("NME of empty landmark sets");
    if (!(norm > 0.0)) throw ConfigError("NME normalization factor must be positive");
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) sum += std::hypot(pred[i].x - truth[i].x, pred[i].y - truth[i].y);
    return 100.0 * sum / static_cast<double>(truth.size()) / norm;
}

/// Inter-ocular distance (outer eye corners) or sqrt(w * h) of the tight
/// ground-truth landmark box.
inline double nme_normalizer(const LandmarkSet& truth, const DatasetProfile& profile) {
    if (profile.norm == NormMode::interocular) {
        if (truth.size() <= std::max(profile.left_eye_outer, profile.right_eye_outer))
            throw ConfigError("landmark set too small for inter-ocular normalization");
        const Point2 a = truth[profile.left_eye_outer], b = truth[profile.right_eye_outer];
        return std::hypot(a.x - b.x, a.y - b.y);
    }
    const FaceBox box = tight_box(truth);
    return std::sqrt(box.width() * box.height());
}

inline double nme_x100(const LandmarkSet& pred, const LandmarkSet& truth, const DatasetProfile& profile) {
    return nme_x100(pred, truth, nme_normalizer(truth, profile));
}

}  // namespace jasr
