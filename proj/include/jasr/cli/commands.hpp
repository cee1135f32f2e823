#pragma once

// Implementations behind the jasrnet subcommands. Each returns a
// CommandResult; run_command() maps exceptions onto the exit-code convention
// 0 = success, 1 = user error, 2 = internal error.

#include <jasr/data/archive.hpp>
#include <jasr/data/augment.hpp>
#include <jasr/data/manifest.hpp>
#include <jasr/data/synthetic.hpp>
#include <jasr/io/image_io.hpp>
#include <jasr/train/ablation.hpp>
#include <jasr/train/trainer.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace jasr::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUserError = 1, kInternalError = 2 };

struct CommandResult {
    int exit_code = kOk;
    std::vector<std::string> artifacts;
};

/// Data root for relative paths: $JASR_DATA_ROOT when set, else `fallback`.
inline fs::path data_root(const fs::path& fallback) {
    if (const char* env = std::getenv("JASR_DATA_ROOT"); env && *env) return env;
    return fallback;
}

inline fs::path resolve(const std::string& p, const fs::path& root) {
    const fs::path path(p);
    return path.is_absolute() || root.empty() ? path : root / path;
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    os << text;
    if (!os) throw Error("cannot write '" + path.string() + "'");
}

/// Runs fn, translating exceptions into exit codes and a one-line message on err.
inline CommandResult run_command(const std::function<CommandResult()>& fn, std::ostream& err = std::cerr) {
    try {
        return fn();
    } catch (const DivergenceError& e) {
        err << "error: " << e.what();
        if (!e.last_good_checkpoint().empty()) err << " (last good checkpoint: " << e.last_good_checkpoint() << ")";
        err << "\n";
        return {kInternalError, {}};
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return {kUserError, {}};
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return {kUserError, {}};
    } catch (const ShapeError& e) {
        err << "error: " << e.what() << "\n";
        return {kUserError, {}};
    } catch (const Error& e) {  // I/O on user-supplied paths
        err << "error: " << e.what() << "\n";
        return {kUserError, {}};
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return {kInternalError, {}};
    }
}

// ---------------------------------------------------------------- prepare

struct PrepareArgs {
    std::string manifest;
    std::string profile = "300w";
    std::string out_dir;
    int copies = 15;  ///< augmented copies per record; 0 writes only original.jsnr
    std::uint64_t seed = 0;
    double heatmap_sigma = kDefaultHeatmapSigma;
};

/// Crops every manifest record to the 128 px head region and writes
///   original.jsnr  one un-augmented sample per record
///   train.jsnr     `copies` augmented samples per record
///   split.tsv      record index, status, sample count, paths
/// Failed records are logged (errors.log) and make the exit code 1.
inline CommandResult cmd_prepare(const PrepareArgs& a, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    const DatasetProfile profile = profile_from_name(a.profile);
    if (a.copies < 0) throw ConfigError("copies must be >= 0");
    if (a.out_dir.empty()) throw ConfigError("--out is required");
    const fs::path manifest_path(a.manifest);
    const auto records =
        parse_manifest(read_text_file(manifest_path), data_root(manifest_path.parent_path()));
    if (records.empty()) throw ConfigError("manifest '" + a.manifest + "' lists no records");
    fs::create_directories(a.out_dir);

    AugmentationParams aug;
    aug.copies = std::max(1, a.copies);
    aug.heatmap_sigma = a.heatmap_sigma;
    if (!profile.mirror) aug.flip_probability = 0.0;

    std::vector<FaceSample> originals, augmented;
    std::vector<std::size_t> original_src, augmented_src;
    std::vector<csv::Row> split{{"record", "status", "samples", "image", "annotation"}};
    std::vector<std::string> failures;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const ManifestRecord& r = records[i];
        try {
            if (!fs::exists(r.image)) throw Error("missing image file '" + r.image.string() + "'");
            if (!fs::exists(r.annotation)) throw Error("missing annotation file '" + r.annotation.string() + "'");
            LandmarkSet lm;
            try {
                lm = parse_landmark_file(read_text_file(r.annotation));
            } catch (const ParseError& e) {
                throw Error("'" + r.annotation.string() + "': " + e.what());
            }
            if (lm.size() != profile.num_landmarks)
                throw Error("'" + r.annotation.string() + "' has " + std::to_string(lm.size()) + " points, profile '" +
                            profile.name + "' expects " + std::to_string(profile.num_landmarks));
            const Tensor<float> image = io::read_image(r.image);
            const FaceBox box = r.box.value_or(head_box_from_landmarks(lm));
            CropResult crop = crop_and_resize(image, box, kHrSize);
            LandmarkSet local;
            for (const auto& p : lm.points) local.points.push_back(crop.transform.apply(p));
            clamp_unit(crop.image);
            FaceSample s = make_sample(r.image.stem().string(), std::move(crop.image), std::move(local), a.heatmap_sigma);
            std::size_t n = 0;
            if (a.copies > 0) {
                Rng rng = Rng::stream(a.seed, i);
                for (auto& c : augment(s, aug, profile, rng)) {
                    augmented.push_back(std::move(c));
                    augmented_src.push_back(i);
                    ++n;
                }
            }
            originals.push_back(std::move(s));
            original_src.push_back(i);
            split.push_back({std::to_string(i), "ok", std::to_string(n), r.image.string(), r.annotation.string()});
        } catch (const Error& e) {
            const std::string msg = "manifest line " + std::to_string(r.line) + ": " + e.what();
            err << "error: " << msg << "\n";
            failures.push_back(msg);
            split.push_back({std::to_string(i), "failed", "0", r.image.string(), r.annotation.string()});
        }
    }

    CommandResult res;
    const fs::path out(a.out_dir);
    if (!originals.empty()) {
        archive::write((out / "original.jsnr").string(), originals, profile.name, original_src);
        res.artifacts.push_back((out / "original.jsnr").string());
    }
    if (!augmented.empty()) {
        archive::write((out / "train.jsnr").string(), augmented, profile.name, augmented_src);
        res.artifacts.push_back((out / "train.jsnr").string());
    }
    write_text(out / "split.tsv", [&] {
        std::string s;
        for (const auto& row : split) {
            for (std::size_t j = 0; j < row.size(); ++j) s += (j ? "\t" : "") + row[j];
            s += "\n";
        }
        return s;
    }());
    res.artifacts.push_back((out / "split.tsv").string());
    if (!failures.empty()) {
        std::string text;
        for (const auto& f : failures) text += f + "\n";
        write_text(out / "errors.log", text);
        res.artifacts.push_back((out / "errors.log").string());
        res.exit_code = kUserError;
    }
    log << "prepared " << originals.size() << " of " << records.size() << " records, " << augmented.size()
        << " augmented samples -> " << a.out_dir << "\n";
    return res;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string resume;
    std::string out_dir;  ///< overrides the config's out_dir
};

inline void plot_history(const TrainHistory& h, const fs::path& path, const std::string& title) {
    io::Series total{"total", {}, {}, {200, 80, 20}}, sr{"sr_term", {}, {}, {30, 160, 30}},
        hm{"heatmap_term", {}, {}, {30, 30, 200}};
    for (const auto& s : h.steps) {
        const double x = static_cast<double>(s.step);
        total.x.push_back(x), total.y.push_back(s.loss.total);
        sr.x.push_back(x), sr.y.push_back(s.loss.sr_term);
        hm.x.push_back(x), hm.y.push_back(s.loss.heatmap_term);
    }
    std::vector<io::Series> series{total};
    if (std::any_of(h.steps.begin(), h.steps.end(), [](const StepRecord& s) { return s.loss.sr_term != 0.0; }))
        series.push_back(sr);
    if (std::any_of(h.steps.begin(), h.steps.end(), [](const StepRecord& s) { return s.loss.heatmap_term != 0.0; }))
        series.push_back(hm);
    io::write_mat(path, io::line_plot(title, "step", series, true));
}

inline void plot_validation(const TrainHistory& h, const fs::path& path) {
    io::Series psnr{"val PSNR-Y (dB)", {}, {}, {200, 80, 20}}, nme{"val NME x100", {}, {}, {30, 30, 200}};
    for (const auto& e : h.epochs)
        if (e.validation) {
            if (auto p = e.validation->psnr_db()) psnr.x.push_back(e.epoch), psnr.y.push_back(*p);
            if (auto n = e.validation->nme_x100()) nme.x.push_back(e.epoch), nme.y.push_back(*n);
        }
    std::vector<io::Series> series;
    if (!psnr.x.empty()) series.push_back(psnr);
    if (!nme.x.empty()) series.push_back(nme);
    if (!series.empty()) io::write_mat(path, io::line_plot("validation", "epoch", series));
}

/// Loads the training data named by an experiment config and splits off
/// validation when no separate split is configured.
struct TrainingData {
    std::shared_ptr<const SampleSource> train, validation;
};

inline TrainingData load_training_data(const ExperimentConfig& cfg, const fs::path& root) {
    if (cfg.train_data.empty()) throw ConfigError("config sets no train_data");
    auto all = std::make_shared<ArchiveDataset>(resolve(cfg.train_data, root).string());
    const DatasetProfile profile = profile_from_name(cfg.profile);
    if (all->num_landmarks() != profile.num_landmarks)
        throw ConfigError("archive '" + cfg.train_data + "' has " + std::to_string(all->num_landmarks()) +
                          " landmarks, profile '" + cfg.profile + "' expects " + std::to_string(profile.num_landmarks));
    TrainingData d;
    if (!cfg.val_data.empty()) {
        d.train = all;
        d.validation = std::make_shared<ArchiveDataset>(resolve(cfg.val_data, root).string());
    } else if (cfg.train.validation_fraction > 0.0) {
        auto [tr, va] = holdout_split(*all, cfg.train.validation_fraction, cfg.train.seed);
        d.train = std::make_shared<IndexedDataset>(all, std::move(tr));
        if (!va.empty()) d.validation = std::make_shared<IndexedDataset>(all, std::move(va));
    } else {
        d.train = all;
    }
    return d;
}

/// Trains from an experiment file. Writes into out_dir: checkpoints, history.csv
/// (one row per step), epochs.csv, config.txt (resolved config), loss_curve.png
/// and validation.png. Resuming continues epoch and step numbering and keeps the
/// earlier history rows.
inline CommandResult cmd_train(const TrainArgs& a, std::ostream& log = std::cout) {
    ExperimentConfig cfg = parse_experiment_config(read_text_file(a.config));
    if (a.seed) cfg.train.seed = *a.seed;
    if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
    const fs::path root = data_root(fs::path(a.config).parent_path());
    const TrainingData data = load_training_data(cfg, root);
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);

    std::vector<StepRecord> previous;
    if (!a.resume.empty() && fs::exists(out / "history.csv")) {
        for (const auto& s : TrainHistory::parse_steps_csv(read_text_file(out / "history.csv")))
            previous.push_back(s);
    }

    TrainOptions opt;
    opt.profile = profile_from_name(cfg.profile);
    opt.validation = data.validation.get();
    opt.out_dir = out.string();
    opt.resume = a.resume;
    opt.on_epoch = [&](const EpochRecord& e) {
        log << "epoch " << e.epoch << "  loss " << e.mean_loss << "  " << e.seconds << "s";
        if (e.validation) {
            if (auto p = e.validation->psnr_db()) log << "  val PSNR " << *p;
            if (auto n = e.validation->nme_x100()) log << "  val NME " << *n;
        }
        log << std::endl;
    };
    log << "training " << to_string(cfg.train.variant) << " (" << count_parameters(cfg.model) << " parameters) on "
        << data.train->size() << " samples" << (data.validation ? ", " + std::to_string(data.validation->size()) + " held out" : "")
        << std::endl;
    write_text(out / "config.txt", format_experiment_config(cfg));
    TrainResult r = train(cfg.model, cfg.train, *data.train, opt);

    if (!previous.empty() && !r.history.steps.empty()) {
        const std::uint64_t first = r.history.steps.front().step;
        std::erase_if(previous, [&](const StepRecord& s) { return s.step >= first; });
        r.history.steps.insert(r.history.steps.begin(), previous.begin(), previous.end());
    }
    CommandResult res;
    write_text(out / "history.csv", r.history.steps_csv());
    write_text(out / "epochs.csv", r.history.epochs_csv());
    plot_history(r.history, out / "loss_curve.png", "training loss (" + to_string(cfg.train.variant) + ")");
    res.artifacts = {(out / "config.txt").string(), (out / "history.csv").string(), (out / "epochs.csv").string(),
                     (out / "loss_curve.png").string()};
    plot_validation(r.history, out / "validation.png");
    if (fs::exists(out / "validation.png")) res.artifacts.push_back((out / "validation.png").string());
    if (!r.last_checkpoint.empty()) res.artifacts.push_back(r.last_checkpoint);
    if (!r.best_checkpoint.empty()) res.artifacts.push_back(r.best_checkpoint);
    log << "checkpoint: " << r.last_checkpoint << "\n";
    if (!r.best_checkpoint.empty()) log << "best checkpoint: " << r.best_checkpoint << " (epoch " << r.best_epoch << ")\n";
    return res;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string checkpoint;  ///< empty with a baseline
    std::string data;
    std::string out_csv;
    std::string profile;  ///< defaults to the archive's profile
    std::optional<Baseline> baseline;
};

/// Writes a MetricsReport CSV; the final "mean" row is the summary (PSNR-Y,
/// SSIM, NME x100). Columns a model cannot produce are left empty.
inline CommandResult cmd_eval(const EvalArgs& a, std::ostream& log = std::cout) {
    if (a.out_csv.empty()) throw ConfigError("--out is required");
    const fs::path root = data_root({});
    ArchiveDataset data(resolve(a.data, root).string());
    const DatasetProfile profile = profile_from_name(a.profile.empty() ? data.profile() : a.profile);
    MetricsReport report;
    if (a.baseline) {
        report = evaluate_baseline(data, *a.baseline, profile);
    } else {
        if (a.checkpoint.empty()) throw ConfigError("--checkpoint is required unless --baseline is given");
        const Checkpoint<float> ck = load_checkpoint<float>(a.checkpoint);
        report = evaluate(ck.model, data, profile);
    }
    write_text(a.out_csv, report.to_csv());
    auto show = [&](const char* name, std::optional<double> v) {
        log << name << " " << (v ? csv::num(v, 4) : std::string("-")) << "  ";
    };
    show("PSNR-Y", report.psnr_db());
    show("SSIM", report.ssim());
    show("NMEx100", report.nme_x100());
    log << "(" << report.rows.size() << " samples) -> " << a.out_csv << "\n";
    return {kOk, {a.out_csv}};
}

// ---------------------------------------------------------------- infer

struct InferArgs {
    std::string checkpoint;
    std::string image;
    std::string out_dir;
};

/// Prepares the network input for an arbitrary image: 16 x 16 (input/8) images
/// are upsampled 8x bicubically; images already at the input size are used as
/// is; anything else is first resized to input/8.
inline Tensor<float> inference_input(const Tensor<float>& img, std::size_t input_size) {
    const std::size_t lr = input_size / 8;
    if (img.height() == input_size && img.width() == input_size) return img;
    Tensor<float> small = img;
    if (img.height() != lr || img.width() != lr)
        small = crop_and_resize(img, {0, 0, double(img.width()), double(img.height())}, lr).image;
    Tensor<float> up = bicubic_resample(small, {8, 1});
    clamp_unit(up);
    return up;
}

/// Emits <stem>_sr.png (when the model has an SR head), <stem>_landmarks.png
/// (predicted points drawn on the SR output, or on the bicubic input for
/// alignment-only models) and <stem>.pts.
inline CommandResult cmd_infer(const InferArgs& a, std::ostream& log = std::cout) {
    if (a.out_dir.empty()) throw ConfigError("--out is required");
    const Checkpoint<float> ck = load_checkpoint<float>(a.checkpoint);
    const Tensor<float> input = inference_input(io::read_image(a.image), static_cast<std::size_t>(ck.model.config().input_size));
    const ModelOutput<float> out = ck.model.forward(input);
    fs::create_directories(a.out_dir);
    const std::string stem = fs::path(a.image).stem().string();
    const fs::path dir(a.out_dir);
    CommandResult res;
    Tensor<float> shown = input;
    if (out.sr_image) {
        shown = *out.sr_image;
        clamp_unit(shown);
        io::write_image(dir / (stem + "_sr.png"), shown);
        res.artifacts.push_back((dir / (stem + "_sr.png")).string());
    }
    if (!out.stage_heatmaps.empty()) {
        const LandmarkSet lm = decode_heatmaps(out.stage_heatmaps.back());
        io::write_mat(dir / (stem + "_landmarks.png"), io::landmark_overlay(shown, lm));
        write_text(dir / (stem + ".pts"), serialize_landmarks(lm));
        res.artifacts.push_back((dir / (stem + "_landmarks.png")).string());
        res.artifacts.push_back((dir / (stem + ".pts")).string());
    }
    for (const auto& p : res.artifacts) log << p << "\n";
    return res;
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
    std::string config;     ///< base experiment config (model + training settings)
    std::string data;       ///< overrides the config's train_data
    std::string eval_data;  ///< defaults to the config's val_data, else the held-out split, else the training data
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

/// Trains every grid row on the same data and seed; writes ablation.csv,
/// curves/<row>.png and histories/<row>.csv.
inline CommandResult cmd_ablate(const AblateArgs& a, std::ostream& log = std::cout) {
    if (a.out_dir.empty()) throw ConfigError("--out is required");
    ExperimentConfig cfg = parse_experiment_config(read_text_file(a.config));
    if (a.seed) cfg.train.seed = *a.seed;
    if (!a.data.empty()) cfg.train_data = a.data;
    if (!a.eval_data.empty()) cfg.val_data = a.eval_data;
    const fs::path root = data_root(fs::path(a.config).parent_path());
    const TrainingData data = load_training_data(cfg, root);
    const SampleSource& eval = data.validation ? *data.validation : *data.train;

    const fs::path out(a.out_dir);
    fs::create_directories(out / "curves");
    fs::create_directories(out / "histories");
    CommandResult res;
    auto slug = [](std::string s) {
        for (auto& c : s)
            if (c == '=') c = '_';
        return s;
    };
    ModelConfig base = cfg.model;
    base.fusion = cfg.model.fusion == FusionMode::off ? FusionMode::add : cfg.model.fusion;
    const auto results = run_ablation_grid(
        ablation_grid(base, cfg.train), *data.train, eval, profile_from_name(cfg.profile), [&](const AblationResult& r) {
            const std::string name = slug(r.entry.row);
            write_text(out / "histories" / (name + ".csv"), r.history.steps_csv());
            plot_history(r.history, out / "curves" / (name + ".png"), "training loss (" + r.entry.row + ")");
            res.artifacts.push_back((out / "curves" / (name + ".png")).string());
            log << r.entry.table << " " << r.entry.row << ": " << r.parameters << " params";
            if (auto p = r.metrics.psnr_db()) log << "  PSNR " << *p;
            if (auto n = r.metrics.nme_x100()) log << "  NME " << *n;
            log << (r.reused ? "  (shared run)" : "") << std::endl;
        });
    write_text(out / "ablation.csv", ablation_csv(results));
    res.artifacts.insert(res.artifacts.begin(), (out / "ablation.csv").string());
    log << "grid -> " << (out / "ablation.csv").string() << "\n";
    return res;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    std::string out_dir;
    int count = 16;
    std::uint64_t seed = 0;
    int size = 256;  ///< canvas size; faces occupy roughly the middle half
};

/// Writes a small synthetic 68-point dataset (PNG images, .pts annotations and
/// manifest.tsv) for demos and end-to-end tests.
inline CommandResult cmd_synth(const SynthArgs& a, std::ostream& log = std::cout) {
    if (a.out_dir.empty()) throw ConfigError("--out is required");
    if (a.count < 1) throw ConfigError("--count must be >= 1");
    if (a.size < 64) throw ConfigError("--size must be >= 64");
    const fs::path out(a.out_dir);
    fs::create_directories(out);
    std::string manifest = "# image\tannotation\n";
    CommandResult res;
    const double unit = static_cast<double>(a.size) / 256.0;
    for (int i = 0; i < a.count; ++i) {
        Rng rng = Rng::stream(a.seed, static_cast<std::uint64_t>(i));
        LandmarkSet lm = synthetic::random_landmarks_68(rng);
        // place the 128 px layout inside the larger canvas
        const double s = 1.2 * unit, off = 0.5 * a.size - 63.5 * s;
        for (auto& p : lm.points) p = {off + s * p.x, off + s * p.y};
        const Tensor<float> img = synthetic::render_face(lm, static_cast<std::size_t>(a.size), rng, s);
        char name[32];
        std::snprintf(name, sizeof name, "face_%04d", i);
        io::write_image(out / (std::string(name) + ".png"), img);
        write_text(out / (std::string(name) + ".pts"), serialize_landmarks(lm));
        manifest += std::string(name) + ".png\t" + name + ".pts\n";
    }
    write_text(out / "manifest.tsv", manifest);
    res.artifacts.push_back((out / "manifest.tsv").string());
    log << "wrote " << a.count << " synthetic faces -> " << (out / "manifest.tsv").string() << "\n";
    return res;
}

}  // namespace jasr::cli
