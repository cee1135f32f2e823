#pragma once

#include <jasr/core/csv.hpp>
#include <jasr/core/rng.hpp>
#include <jasr/data/archive.hpp>
#include <jasr/metrics/loss.hpp>
#include <jasr/model/checkpoint.hpp>
#include <jasr/nn/adam.hpp>
#include <jasr/train/config.hpp>
#include <jasr/train/evaluate.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace jasr {

struct StepRecord {
    std::uint64_t step = 0;
    int epoch = 0;
    double lr = 0.0;
    LossBreakdown loss;
};

struct EpochRecord {
    int epoch = 0;
    double seconds = 0.0;
    double mean_loss = 0.0;
    std::optional<MetricsReport> validation;
};

struct TrainHistory {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;

    /// step, epoch, lr, total, sr_term, heatmap_term
    std::string steps_csv() const {
        std::vector<csv::Row> rows{{"step", "epoch", "lr", "total", "sr_term", "heatmap_term"}};
        for (const auto& s : steps)
            rows.push_back({std::to_string(s.step), std::to_string(s.epoch), csv::num(s.lr, 9), csv::num(s.loss.total, 9),
                            csv::num(s.loss.sr_term, 9), csv::num(s.loss.heatmap_term, 9)});
        return csv::format(rows);
    }

    /// epoch, seconds, mean_loss and the validation means (empty when not run).
    std::string epochs_csv() const {
        std::vector<csv::Row> rows{{"epoch", "seconds", "mean_loss", "val_psnr_db", "val_ssim", "val_nme_x100"}};
        for (const auto& e : epochs) {
            const MetricsReport* v = e.validation ? &*e.validation : nullptr;
            rows.push_back({std::to_string(e.epoch), csv::num(e.seconds, 3), csv::num(e.mean_loss, 9),
                            csv::num(v ? v->psnr_db() : std::nullopt), csv::num(v ? v->ssim() : std::nullopt),
                            csv::num(v ? v->nme_x100() : std::nullopt)});
        }
        return csv::format(rows);
    }

    /// Reads steps_csv() output back (used to carry history across --resume).
    static std::vector<StepRecord> parse_steps_csv(const std::string& text) {
        const auto rows = csv::parse_strict(text);
        if (rows.empty() || rows.front() != csv::Row{"step", "epoch", "lr", "total", "sr_term", "heatmap_term"})
            throw ParseError("not a training history CSV");
        std::vector<StepRecord> out;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const auto& r = rows[i];
            StepRecord s;
            s.step = std::stoull(r[0]);
            s.epoch = std::stoi(r[1]);
            s.lr = std::stod(r[2]);
            s.loss = {std::stod(r[3]), std::stod(r[4]), std::stod(r[5]), 1.0};
            out.push_back(s);
        }
        return out;
    }
};

struct TrainOptions {
    DatasetProfile profile = profile_from_name("300w");
    const SampleSource* validation = nullptr;  ///< per-epoch metrics and best-checkpoint selection
    std::string out_dir;                       ///< empty: keep everything in memory
    std::string resume;                        ///< checkpoint to continue from
    std::function<void(const StepRecord&)> on_step;
    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
    Jasrnet<float> model;
    TrainHistory history;
    std::string last_checkpoint;
    std::string best_checkpoint;
    int best_epoch = -1;
    std::optional<MetricsReport> best_validation;
};

/// Held-out split over annotated source records, so augmented copies of one
/// face never straddle train and validation. Returns (train, validation) indices.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(const SampleSource& data,
                                                                                   double fraction,
                                                                                   std::uint64_t seed) {
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < data.size(); ++i) groups[data.source_of(i)].push_back(i);
    std::vector<std::size_t> keys;
    for (const auto& [k, v] : groups) keys.push_back(k);
    std::size_t n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(keys.size())));
    if (fraction > 0.0 && keys.size() > 1) n_val = std::clamp<std::size_t>(n_val, 1, keys.size() - 1);
    Rng rng = Rng::stream(seed, 0x5917);
    rng.shuffle(keys);
    std::vector<bool> is_val(data.size(), false);
    for (std::size_t g = 0; g < n_val; ++g)
        for (std::size_t i : groups[keys[g]]) is_val[i] = true;
    std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < data.size(); ++i) (is_val[i] ? out.second : out.first).push_back(i);
    return out;
}

namespace detail {

// Lower is better for NME, higher for PSNR; stored negated so "smaller wins" throughout.
inline std::optional<double> selection_key(const ModelConfig& m, const MetricsReport& r) {
    if (m.has_align()) return r.nme_x100();
    if (auto p = r.psnr_db()) return -*p;
    return std::nullopt;
}

inline std::string epoch_name(int epoch) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "epoch_%03d.ckpt", epoch);
    return buf;
}

}  // namespace detail

/// Joint optimization of l_sr + alpha * l_heatmap with Adam on the step
/// schedule of lr_at(). Each epoch visits the data in a seeded permutation;
/// gradients are averaged over a batch before one update. Fully deterministic
/// for a given seed.
///
/// With out_dir set, writes last.ckpt every epoch, epoch_NNN.ckpt every
/// checkpoint_every epochs, and best.ckpt when validation improves.
/// A non-finite loss aborts with DivergenceError naming the last good checkpoint.
inline TrainResult train(const ModelConfig& model_config, const TrainConfig& config, const SampleSource& data,
                         const TrainOptions& options = {}) {
    model_config.validate();
    config.validate();
    if (data.size() == 0) throw ConfigError("training dataset is empty");
    check_compatible(model_config, data);
    if (options.validation) check_compatible(model_config, *options.validation);

    namespace fs = std::filesystem;
    if (!options.out_dir.empty()) fs::create_directories(options.out_dir);
    auto out_path = [&](const std::string& name) { return (fs::path(options.out_dir) / name).string(); };

    int first_epoch = 0;
    std::uint64_t step = 0;
    std::optional<double> best_key;
    TrainResult result{Jasrnet<float>::build(model_config, config.seed), {}, {}, {}, -1, std::nullopt};
    nn::Adam<float> adam;

    if (!options.resume.empty()) {
        Checkpoint<float> ck = load_checkpoint<float>(options.resume);
        if (!(ck.model.config() == model_config))
            throw ConfigError("checkpoint '" + options.resume + "' was trained with a different model config");
        result.model = std::move(ck.model);
        if (ck.optimizer) adam = std::move(*ck.optimizer);
        first_epoch = ck.epoch + 1;
        step = ck.extra.value("step", std::uint64_t{0});
        if (ck.extra.contains("best_key") && !ck.extra["best_key"].is_null()) best_key = ck.extra["best_key"].get<double>();
        result.best_epoch = ck.extra.value("best_epoch", -1);
        result.last_checkpoint = options.resume;
        if (!options.out_dir.empty() && fs::exists(out_path("best.ckpt"))) result.best_checkpoint = out_path("best.ckpt");
    }

    Jasrnet<float>& model = result.model;
    const auto params = model.parameters();
    const bool with_sr = model_config.has_sr(), with_align = model_config.has_align();

    auto save = [&](const std::string& path, int epoch) {
        const nlohmann::json extra{{"step", step},
                                   {"train_config", config},
                                   {"best_key", best_key ? nlohmann::json(*best_key) : nlohmann::json()},
                                   {"best_epoch", result.best_epoch}};
        save_checkpoint(path, model, epoch, &adam, extra);
    };

    std::vector<std::size_t> order(data.size());
    for (int epoch = first_epoch; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = lr_at(config, epoch);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng = Rng::stream(config.seed, 1 + static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t loss_n = 0;
        const std::size_t B = static_cast<std::size_t>(config.batch_size);
        for (std::size_t begin = 0; begin < order.size(); begin += B) {
            const std::size_t end = std::min(order.size(), begin + B);
            nn::Tape<float> tape;
            LossBreakdown mean{0.0, 0.0, 0.0, config.alpha};
            for (std::size_t j = begin; j < end; ++j) {
                const FaceSample s = data.at(order[j]);
                const TracedOutput<float> out = model.forward(&tape, nn::Var<float>(s.lr_input));
                JointLoss<float> l = joint_loss(&tape, out, LossTargets<float>::from(s), config.alpha,
                                                config.deep_supervision);
                tape.backward(l.total);
                mean.total += l.parts.total;
                mean.sr_term += l.parts.sr_term;
                mean.heatmap_term += l.parts.heatmap_term;
            }
            const double n = static_cast<double>(end - begin);
            mean.total /= n;
            mean.sr_term /= n;
            mean.heatmap_term /= n;
            if (!std::isfinite(mean.total))
                throw DivergenceError("non-finite loss at step " + std::to_string(step) + " (epoch " +
                                          std::to_string(epoch) + ")",
                                      result.last_checkpoint);
            adam.step(params, tape, lr, 1.0 / n);

            StepRecord rec{step++, epoch, lr, mean};
            if (!with_sr) rec.loss.sr_term = 0.0;
            if (!with_align) rec.loss.heatmap_term = 0.0;
            result.history.steps.push_back(rec);
            loss_sum += mean.total;
            ++loss_n;
            if (options.on_step) options.on_step(rec);
        }

        EpochRecord er{epoch, 0.0, loss_sum / static_cast<double>(loss_n), std::nullopt};
        bool improved = false;
        if (options.validation && options.validation->size() > 0) {
            er.validation = evaluate(model, *options.validation, options.profile);
            const auto key = detail::selection_key(model_config, *er.validation);
            if (key && (!best_key || *key < *best_key)) {
                best_key = key;
                result.best_epoch = epoch;
                result.best_validation = er.validation;
                improved = true;
            }
        }
        if (!options.out_dir.empty()) {
            if (config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0)
                save(out_path(detail::epoch_name(epoch)), epoch);
            save(out_path("last.ckpt"), epoch);
            result.last_checkpoint = out_path("last.ckpt");
            if (improved) {
                save(out_path("best.ckpt"), epoch);
                result.best_checkpoint = out_path("best.ckpt");
            }
        }
        er.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.epochs.push_back(er);
        if (options.on_epoch) options.on_epoch(er);
    }
    return result;
}

}  // namespace jasr
