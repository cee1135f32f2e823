// jasrnet: data preparation, training, evaluation, inference and the ablation grid.

#include <jasr/cli/commands.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr const char* kFooter = R"(Exit codes: 0 success, 1 user error (bad flags, config, data), 2 internal error.
Environment: JASR_DATA_ROOT, when set, is the base for relative paths in
manifests, experiment configs and --data arguments.)";

jasr::Baseline parse_baseline(const std::string& s) {
    if (s == "hr") return jasr::Baseline::hr;
    if (s == "bicubic") return jasr::Baseline::bicubic;
    throw jasr::ConfigError("unknown baseline '" + s + "' (expected hr or bicubic)");
}

}  // namespace

int main(int argc, char** argv) {
    using namespace jasr::cli;
    CLI::App app{"Joint face super-resolution (16x16 -> 128x128) and landmark localization"};
    app.footer(kFooter);
    app.require_subcommand(1);
    app.set_version_flag("--version", "jasrnet 0.1.0");

    PrepareArgs prep;
    auto* p = app.add_subcommand("prepare", "crop, augment and archive a manifest of annotated images");
    p->add_option("manifest", prep.manifest, "tab-separated manifest: image, annotation[, x0 y0 x1 y1]")->required();
    p->add_option("--profile", prep.profile, "dataset profile: 300w, aflw, helen or custom:K")->capture_default_str();
    p->add_option("--out", prep.out_dir, "output directory")->required();
    p->add_option("--copies", prep.copies, "augmented copies per record (0: originals only)")->capture_default_str();
    p->add_option("--seed", prep.seed, "augmentation seed")->capture_default_str();
    p->add_option("--sigma", prep.heatmap_sigma, "heatmap Gaussian sigma in cells")->capture_default_str();

    TrainArgs tr;
    std::uint64_t train_seed = 0;
    auto* t = app.add_subcommand("train", "train from an experiment config");
    t->add_option("--config", tr.config, "experiment config (key = value lines)")->required()->check(CLI::ExistingFile);
    auto* t_seed = t->add_option("--seed", train_seed, "override the config seed");
    t->add_option("--resume", tr.resume, "continue from a checkpoint")->check(CLI::ExistingFile);
    t->add_option("--out", tr.out_dir, "override the config out_dir");

    EvalArgs ev;
    std::string baseline;
    auto* e = app.add_subcommand("eval", "score a checkpoint (or a baseline) on a prepared archive");
    e->add_option("--checkpoint", ev.checkpoint, "model checkpoint");
    e->add_option("--data", ev.data, "prepared archive (.jsnr)")->required();
    e->add_option("--out", ev.out_csv, "metrics CSV to write")->required();
    e->add_option("--profile", ev.profile, "NME normalization profile (default: the archive's)");
    e->add_option("--baseline", baseline, "score 'hr' (identity) or 'bicubic' input instead of a model");

    InferArgs inf;
    auto* i = app.add_subcommand("infer", "super-resolve one image and localize its landmarks");
    i->add_option("--checkpoint", inf.checkpoint, "model checkpoint")->required();
    i->add_option("image", inf.image, "input image (16x16 low-resolution face)")->required();
    i->add_option("--out", inf.out_dir, "output directory")->required();

    AblateArgs ab;
    std::uint64_t ablate_seed = 0;
    auto* a = app.add_subcommand("ablate", "train and score the variant grid");
    a->add_option("--config", ab.config, "base experiment config")->required()->check(CLI::ExistingFile);
    a->add_option("--data", ab.data, "training archive (overrides train_data)");
    a->add_option("--eval-data", ab.eval_data, "evaluation archive (overrides val_data)");
    a->add_option("--out", ab.out_dir, "output directory")->required();
    auto* a_seed = a->add_option("--seed", ablate_seed, "override the config seed");

    SynthArgs sy;
    auto* s = app.add_subcommand("synth", "write a synthetic annotated face set for demos");
    s->add_option("--out", sy.out_dir, "output directory")->required();
    s->add_option("--count", sy.count, "number of faces")->capture_default_str();
    s->add_option("--seed", sy.seed, "generator seed")->capture_default_str();
    s->add_option("--size", sy.size, "canvas size in pixels")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kOk : kUserError;
    }

    CommandResult r = run_command([&]() -> CommandResult {
        if (*p) return cmd_prepare(prep);
        if (*t) {
            if (*t_seed) tr.seed = train_seed;
            return cmd_train(tr);
        }
        if (*e) {
            if (!baseline.empty()) ev.baseline = parse_baseline(baseline);
            return cmd_eval(ev);
        }
        if (*i) return cmd_infer(inf);
        if (*a) {
            if (*a_seed) ab.seed = ablate_seed;
            return cmd_ablate(ab);
        }
        return cmd_synth(sy);
    });
    return r.exit_code;
}
