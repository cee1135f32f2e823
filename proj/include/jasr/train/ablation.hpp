#pragma once

#include <jasr/core/csv.hpp>
#include <jasr/train/evaluate.hpp>
#include <jasr/train/trainer.hpp>

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace jasr {

/// One row of the grid. Rows sharing an identical (model, train) configuration
/// are trained once and reuse the result.
struct AblationEntry {
    std::string table;  ///< "ablation" or "variations"
    std::string row;    ///< e.g. "BL_SR", "Concat", "S=2", "T=16"
    std::string group;  ///< ablation column: BL, BL_F, JT, JT_F, JASRNet
    ModelConfig model;
    TrainConfig train;
};

/// The five-column ablation (BL, BL_F, JT, JT_F, JASRNet; single-task
/// baselines split into their SR and alignment rows) followed by the
/// variations of the full model: fusion by concatenation vs addition, one or
/// two alignment stages, and half vs full deep-extraction depth.
inline std::vector<AblationEntry> ablation_grid(const ModelConfig& base, const TrainConfig& train) {
    std::vector<AblationEntry> grid;
    auto add = [&](std::string table, std::string row, std::string group, Variant v, ModelConfig m) {
        TrainConfig t = train;
        t.variant = v;
        grid.push_back({std::move(table), std::move(row), std::move(group), apply_variant(m, v), t});
    };
    ModelConfig added = base;
    added.fusion = FusionMode::add;
    add("ablation", "BL_SR", "BL", Variant::BL_SR, added);
    add("ablation", "BL_ALIGN", "BL", Variant::BL_ALIGN, added);
    add("ablation", "BL_F_SR", "BL_F", Variant::BL_F_SR, added);
    add("ablation", "BL_F_ALIGN", "BL_F", Variant::BL_F_ALIGN, added);
    add("ablation", "JT", "JT", Variant::JT, added);
    add("ablation", "JT_F", "JT_F", Variant::JT_F, added);
    add("ablation", "FULL", "JASRNet", Variant::FULL, added);

    ModelConfig concat = added;
    concat.fusion = FusionMode::concat;
    add("variations", "Concat", "JASRNet", Variant::FULL, concat);
    add("variations", "Adding", "JASRNet", Variant::FULL, added);
    for (int s : {1, 2}) {
        ModelConfig m = added;
        m.alignment_stages = s;
        add("variations", "S=" + std::to_string(s), "JASRNet", Variant::FULL, m);
    }
    for (int t : {std::max(1, base.extraction_blocks / 2), base.extraction_blocks}) {
        ModelConfig m = added;
        m.extraction_blocks = t;
        add("variations", "T=" + std::to_string(t), "JASRNet", Variant::FULL, m);
    }
    return grid;
}

struct AblationResult {
    AblationEntry entry;
    std::int64_t parameters = 0;
    MetricsReport metrics;
    TrainHistory history;
    bool reused = false;  ///< same configuration as an earlier row
};

/// Trains and evaluates every grid row on the same data and seed. on_row fires
/// after each row completes.
inline std::vector<AblationResult> run_ablation_grid(
    const std::vector<AblationEntry>& grid, const SampleSource& train_data, const SampleSource& eval_data,
    const DatasetProfile& profile, const std::function<void(const AblationResult&)>& on_row = {}) {
    std::vector<AblationResult> out;
    std::map<std::string, std::size_t> done;
    for (const auto& e : grid) {
        const std::string key = nlohmann::json{{"model", e.model}, {"train", e.train}}.dump();
        AblationResult r;
        if (auto it = done.find(key); it != done.end()) {
            r = out[it->second];
            r.entry = e;
            r.reused = true;
        } else {
            TrainOptions opt;
            opt.profile = profile;
            TrainResult tr = train(e.model, e.train, train_data, opt);
            r.entry = e;
            r.parameters = tr.model.parameter_count();
            r.metrics = evaluate(tr.model, eval_data, profile);
            r.history = std::move(tr.history);
            done.emplace(key, out.size());
        }
        out.push_back(r);
        if (on_row) on_row(out.back());
    }
    return out;
}

/// table, row, group, variant, fusion_mode, alignment_stages, extraction_blocks,
/// params, params_m, psnr_db, ssim, nme_x100. Metric cells are empty where the
/// variant has no matching head.
inline std::string ablation_csv(const std::vector<AblationResult>& results) {
    std::vector<csv::Row> rows{{"table", "row", "group", "variant", "fusion_mode", "alignment_stages",
                                "extraction_blocks", "params", "params_m", "psnr_db", "ssim", "nme_x100"}};
    for (const auto& r : results) {
        const ModelConfig& m = r.entry.model;
        rows.push_back({r.entry.table, r.entry.row, r.entry.group, to_string(r.entry.train.variant), to_string(m.fusion),
                        m.has_align() ? std::to_string(m.alignment_stages) : "", std::to_string(m.extraction_blocks),
                        std::to_string(r.parameters), csv::num(static_cast<double>(r.parameters) / 1e6, 2),
                        csv::num(r.metrics.psnr_db(), 4), csv::num(r.metrics.ssim(), 4),
                        csv::num(r.metrics.nme_x100(), 4)});
    }
    return csv::format(rows);
}

}  // namespace jasr
