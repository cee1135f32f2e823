#pragma once

#include <jasr/data/archive.hpp>
#include <jasr/data/heatmaps.hpp>
#include <jasr/metrics/nme.hpp>
#include <jasr/metrics/quality.hpp>
#include <jasr/metrics/report.hpp>
#include <jasr/model/jasrnet.hpp>

#include <string>

namespace jasr {

/// Throws when a model with an alignment head cannot score this dataset.
inline void check_compatible(const ModelConfig& model, const SampleSource& data) {
    if (model.input_size != static_cast<int>(kHrSize))
        throw ConfigError("model input size " + std::to_string(model.input_size) + " does not match " +
                          std::to_string(kHrSize) + "-pixel samples");
    if (model.has_align() && data.size() > 0 && static_cast<std::size_t>(model.num_landmarks) != data.num_landmarks())
        throw ConfigError("landmark count mismatch: model predicts " + std::to_string(model.num_landmarks) +
                          " points, dataset has " + std::to_string(data.num_landmarks()));
}

/// Metrics for one sample given an SR prediction (may be null) and predicted
/// landmarks (may be null). SR is clamped to [0, 1] and scored inside the face box.
inline MetricsReport::Row score_sample(const FaceSample& s, const Tensor<float>* sr, const LandmarkSet* landmarks,
                                       const DatasetProfile& profile) {
    MetricsReport::Row row{s.id, std::nullopt, std::nullopt, std::nullopt};
    if (sr) {
        Tensor<float> pred = *sr;
        clamp_unit(pred);
        const PixelRegion region = PixelRegion::covering(s.face_box, s.image_size(), s.image_size());
        row.psnr_db = psnr_y(pred, s.hr_image, region);
        row.ssim = ssim_y(pred, s.hr_image, region);
    }
    if (landmarks) row.nme_x100 = nme_x100(*landmarks, s.landmarks, profile);
    return row;
}

/// Frozen forward pass over every sample. Landmarks come from the final stage.
template <class T>
MetricsReport evaluate(const Jasrnet<T>& model, const SampleSource& data, const DatasetProfile& profile) {
    check_compatible(model.config(), data);
    MetricsReport report;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const FaceSample s = data.at(i);
        const ModelOutput<T> out = model.forward(s.lr_input.template cast<T>());
        std::optional<Tensor<float>> sr;
        std::optional<LandmarkSet> lm;
        if (out.sr_image) sr = out.sr_image->template cast<float>();
        if (!out.stage_heatmaps.empty()) lm = decode_heatmaps(out.stage_heatmaps.back());
        report.rows.push_back(score_sample(s, sr ? &*sr : nullptr, lm ? &*lm : nullptr, profile));
    }
    return report;
}

enum class Baseline { hr, bicubic };

/// Scores a fixed "prediction" taken from the samples themselves: the HR image
/// (identity check) or the bicubic LR input. No landmark column.
inline MetricsReport evaluate_baseline(const SampleSource& data, Baseline which, const DatasetProfile& profile) {
    MetricsReport report;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const FaceSample s = data.at(i);
        report.rows.push_back(score_sample(s, which == Baseline::hr ? &s.hr_image : &s.lr_input, nullptr, profile));
    }
    return report;
}

}  // namespace jasr
