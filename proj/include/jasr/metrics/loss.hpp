#pragma once

#include <jasr/data/sample.hpp>
#include <jasr/model/jasrnet.hpp>
#include <jasr/nn/autograd.hpp>

#include <vector>

namespace jasr {

/// total == sr_term + alpha * heatmap_term
struct LossBreakdown {
    double total = 0.0;
    double sr_term = 0.0;       ///< mean absolute SR error
    double heatmap_term = 0.0;  ///< mean squared heatmap error (averaged over supervised stages)
    double alpha = 1.0;
};

template <class T>
struct LossTargets {
    Tensor<T> hr_image;
    Tensor<T> heatmaps;

    static LossTargets from(const FaceSample& s) {
        return {s.hr_image.template cast<T>(), s.target_heatmaps.template cast<T>()};
    }
};

template <class T>
struct JointLoss {
    nn::Var<T> total;
    LossBreakdown parts;
};

/// l = l_sr + alpha * l_heatmap with mean-reduced L1 and MSE terms. With deep
/// supervision every stage is supervised and the MSEs are averaged; otherwise
/// only the final stage. An absent head contributes 0.
template <class T>
JointLoss<T> joint_loss(nn::Tape<T>* tape, const TracedOutput<T>& out, const LossTargets<T>& target, double alpha,
                        bool deep_supervision = true) {
    if (alpha < 0.0) throw ConfigError("loss weight alpha must be >= 0");
    JointLoss<T> r;
    r.parts.alpha = alpha;
    std::vector<std::pair<T, nn::Var<T>>> terms;
    if (out.sr_image.valid()) {
        nn::Var<T> sr = nn::l1_mean(tape, out.sr_image, target.hr_image);
        r.parts.sr_term = static_cast<double>(sr.value()[0]);
        terms.emplace_back(T(1), sr);
    }
    if (!out.stage_heatmaps.empty()) {
        const std::size_t first = deep_supervision ? 0 : out.stage_heatmaps.size() - 1;
        const T w = static_cast<T>(alpha / static_cast<double>(out.stage_heatmaps.size() - first));
        double hm = 0.0;
        for (std::size_t s = first; s < out.stage_heatmaps.size(); ++s) {
            nn::Var<T> m = nn::mse_mean(tape, out.stage_heatmaps[s], target.heatmaps);
            hm += static_cast<double>(m.value()[0]);
            terms.emplace_back(w, m);
        }
        r.parts.heatmap_term = hm / static_cast<double>(out.stage_heatmaps.size() - first);
    }
    r.total = nn::weighted_sum(tape, terms);
    r.parts.total = static_cast<double>(r.total.value()[0]);
    return r;
}

/// Untracked evaluation on a plain model output.
template <class T>
LossBreakdown joint_loss(const ModelOutput<T>& out, const LossTargets<T>& target, double alpha,
                         bool deep_supervision = true) {
    TracedOutput<T> t;
    if (out.sr_image) t.sr_image = nn::Var<T>(*out.sr_image);
    for (const auto& h : out.stage_heatmaps) t.stage_heatmaps.emplace_back(h);
    return joint_loss<T>(nullptr, t, target, alpha, deep_supervision).parts;
}

}  // namespace jasr
