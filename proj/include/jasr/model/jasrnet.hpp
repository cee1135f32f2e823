#pragma once

#include <jasr/core/rng.hpp>
#include <jasr/model/config.hpp>
#include <jasr/nn/autograd.hpp>

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace jasr {

/// Encoder outputs consumed by fusion: H0..H2 precede each max-pool, H3 is the
/// last deep-extraction block.
template <class T>
struct FeaturePyramid {
    nn::Var<T> h0, h1, h2, h3;
};

/// Inference result. stage_heatmaps.back() is the final prediction.
template <class T>
struct ModelOutput {
    std::optional<Tensor<T>> sr_image;
    std::vector<Tensor<T>> stage_heatmaps;
};

/// Result of a recorded forward pass; vars stay attached to the tape.
template <class T>
struct TracedOutput {
    nn::Var<T> sr_image;  // invalid when the SR head is absent
    std::vector<nn::Var<T>> stage_heatmaps;
};

/// Joint super-resolution and landmark heatmap network.
///
/// Parameters are owned through stable pointers, so a model is move-only and
/// its layers can be referenced from tape closures while it is alive.
template <class T>
class Jasrnet {
public:
    using Var = nn::Var<T>;
    using Tape = nn::Tape<T>;

    Jasrnet(const Jasrnet&) = delete;
    Jasrnet& operator=(const Jasrnet&) = delete;
    Jasrnet(Jasrnet&&) noexcept = default;
    Jasrnet& operator=(Jasrnet&&) noexcept = default;

    /// Builds the network with He fan-in initialization (zero biases) drawn from seed.
    static Jasrnet build(const ModelConfig& config, std::uint64_t seed) {
        config.validate();
        Jasrnet net(config);
        Rng rng(seed);
        net.construct(&rng);
        return net;
    }

    const ModelConfig& config() const noexcept { return config_; }

    std::vector<nn::Param<T>*> parameters() {
        std::vector<nn::Param<T>*> out;
        for (auto& p : params_) out.push_back(p.get());
        return out;
    }
    std::vector<const nn::Param<T>*> parameters() const {
        std::vector<const nn::Param<T>*> out;
        for (const auto& p : params_) out.push_back(p.get());
        return out;
    }

    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (const auto& p : params_) n += static_cast<std::int64_t>(p->value.size());
        return n;
    }

    nn::Param<T>* find(const std::string& name) {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : params_[it->second].get();
    }

    /// Same architecture with parameters converted to U.
    template <class U>
    Jasrnet<U> cast() const {
        Jasrnet<U> out = Jasrnet<U>::structure_only(config_);
        auto dst = out.parameters();
        for (std::size_t i = 0; i < params_.size(); ++i) dst[i]->value = params_[i]->value.template cast<U>();
        return out;
    }

    /// Network with correctly shaped, zero-valued parameters (used when loading).
    static Jasrnet structure_only(const ModelConfig& config) {
        config.validate();
        Jasrnet net(config);
        net.construct(nullptr);
        return net;
    }

    FeaturePyramid<T> encoder_forward(Tape* tape, const Var& input) const {
        const auto& s = input.value().shape();
        const std::size_t n = static_cast<std::size_t>(config_.input_size);
        if (s != Shape{3, n, n})
            throw ShapeError("model input must be " + shape_str({3, n, n}) + ", got " + shape_str(s));
        FeaturePyramid<T> fp;
        Var x = nn::relu(tape, conv(tape, input, enc_conv0_));
        fp.h0 = residual(tape, x, enc_res0_);
        fp.h1 = level(tape, fp.h0, levels_[0]);
        fp.h2 = level(tape, fp.h1, levels_[1]);
        Var h = level(tape, fp.h2, levels_[2]);
        for (const auto& b : extract_) h = residual(tape, h, b);
        fp.h3 = h;
        return fp;
    }

    Var fuse(Tape* tape, const FeaturePyramid<T>& fp) const {
        switch (config_.fusion) {
            case FusionMode::off: return fp.h3;
            case FusionMode::add: {
                Var a = nn::add(tape, conv(tape, fp.h0, fuse_g_[0]), fp.h1);
                a = nn::add(tape, conv(tape, a, fuse_g_[1]), fp.h2);
                return nn::add(tape, conv(tape, a, fuse_g_[2]), fp.h3);
            }
            case FusionMode::concat: {
                Var a = conv(tape, nn::concat(tape, conv(tape, fp.h0, fuse_g_[0]), fp.h1), fuse_merge_[0]);
                a = conv(tape, nn::concat(tape, conv(tape, a, fuse_g_[1]), fp.h2), fuse_merge_[1]);
                return conv(tape, nn::concat(tape, conv(tape, a, fuse_g_[2]), fp.h3), fuse_merge_[2]);
            }
        }
        return fp.h3;
    }

    /// skip_source is H0; required when the long skip is enabled.
    Var sr_head(Tape* tape, const Var& fused, const Var* skip_source) const {
        if (!config_.has_sr()) throw ConfigError("model has no super-resolution head");
        Var r = residual(tape, residual(tape, fused, sr_res_[0]), sr_res_[1]);
        if (config_.uses_long_skip()) {
            if (!skip_source || !skip_source->valid())
                throw ConfigError("long skip enabled but no skip source was provided");
            Var s = *skip_source;
            for (const auto& c : sr_skip_) s = nn::maxpool2(tape, nn::relu(tape, conv(tape, s, c)));
            r = nn::add(tape, r, s);
        }
        for (const auto& c : sr_up_) r = nn::pixel_shuffle2(tape, nn::relu(tape, conv(tape, r, c)));
        return conv(tape, r, sr_out_);
    }

    std::vector<Var> align_head(Tape* tape, const Var& fused) const {
        if (!config_.has_align()) throw ConfigError("model has no alignment head");
        std::vector<Var> out;
        for (std::size_t s = 0; s < stages_.size(); ++s) {
            const Stage& st = stages_[s];
            Var z = fused;
            if (s > 0) z = nn::relu(tape, conv(tape, nn::concat(tape, fused, out.back()), st.merge));
            for (const auto& b : st.blocks) z = residual(tape, z, b);
            out.push_back(conv(tape, z, st.proj));
        }
        return out;
    }

    /// One traversal; shared features are computed once for both heads.
    TracedOutput<T> forward(Tape* tape, const Var& input) const {
        FeaturePyramid<T> fp = encoder_forward(tape, input);
        Var h = fuse(tape, fp);
        TracedOutput<T> out;
        if (config_.has_sr()) out.sr_image = sr_head(tape, h, &fp.h0);
        if (config_.has_align()) out.stage_heatmaps = align_head(tape, h);
        return out;
    }

    ModelOutput<T> forward(const Tensor<T>& input) const {
        TracedOutput<T> t = forward(nullptr, Var(input));
        ModelOutput<T> out;
        if (t.sr_image.valid()) out.sr_image = t.sr_image.value();
        for (const auto& v : t.stage_heatmaps) out.stage_heatmaps.push_back(v.value());
        return out;
    }

private:
    struct Conv {
        const nn::Param<T>* weight = nullptr;
        const nn::Param<T>* bias = nullptr;
        std::size_t stride = 1;
    };
    struct ResBlock {
        Conv c1, c2;
    };
    struct Stage {
        Conv merge;  // unused in the first stage
        std::vector<ResBlock> blocks;
        Conv proj;
    };

    // Residual branches and output projections start scaled down so the
    // unnormalized stack begins near identity with small outputs.
    static constexpr double kResidualInitGain = 0.1;
    static constexpr double kOutputInitGain = 0.1;

    explicit Jasrnet(const ModelConfig& c) : config_(c) {}

    template <class>
    friend class Jasrnet;

    Conv add_conv(Rng* rng, const std::string& name, int in, int out, int k, std::size_t stride = 1, double gain = 1.0) {
        auto w = std::make_unique<nn::Param<T>>();
        w->name = name + ".weight";
        w->value = Tensor<T>({std::size_t(out), std::size_t(in), std::size_t(k), std::size_t(k)});
        if (rng) {
            const double std_dev = gain * std::sqrt(2.0 / static_cast<double>(in * k * k));
            for (auto& v : w->value.vec()) v = static_cast<T>(std_dev * rng->normal());
        }
        auto b = std::make_unique<nn::Param<T>>();
        b->name = name + ".bias";
        b->value = Tensor<T>({std::size_t(out)});
        Conv c{w.get(), b.get(), stride};
        for (auto* p : {&w, &b}) {
            index_[(*p)->name] = params_.size();
            params_.push_back(std::move(*p));
        }
        return c;
    }

    ResBlock add_res(Rng* rng, const std::string& name) {
        const int C = config_.channels;
        ResBlock r;
        r.c1 = add_conv(rng, name + ".conv1", C, C, 3);
        r.c2 = add_conv(rng, name + ".conv2", C, C, 3, 1, kResidualInitGain);
        return r;
    }

    void construct(Rng* rng) {
        const ModelConfig& c = config_;
        const int C = c.channels, K = c.num_landmarks;
        enc_conv0_ = add_conv(rng, "encoder.conv0", 3, C, 3);
        enc_res0_ = add_res(rng, "encoder.res0");
        for (int l = 0; l < 3; ++l)
            for (int b = 0; b < c.level_blocks; ++b)
                levels_[l].push_back(
                    add_res(rng, "encoder.level" + std::to_string(l + 1) + ".res" + std::to_string(b)));
        for (int b = 0; b < c.extraction_blocks; ++b) extract_.push_back(add_res(rng, "extract.res" + std::to_string(b)));
        if (c.fusion != FusionMode::off) {
            for (int i = 0; i < 3; ++i) fuse_g_.push_back(add_conv(rng, "fusion.g" + std::to_string(i + 1), C, C, 3, 2));
            if (c.fusion == FusionMode::concat)
                for (int i = 0; i < 3; ++i)
                    fuse_merge_.push_back(add_conv(rng, "fusion.merge" + std::to_string(i + 1), 2 * C, C, 3));
        }
        if (c.has_sr()) {
            sr_res_.push_back(add_res(rng, "sr.res0"));
            sr_res_.push_back(add_res(rng, "sr.res1"));
            if (c.uses_long_skip())
                for (int i = 0; i < 3; ++i) sr_skip_.push_back(add_conv(rng, "sr.skip" + std::to_string(i), C, C, 3));
            for (int i = 0; i < 3; ++i) sr_up_.push_back(add_conv(rng, "sr.up" + std::to_string(i), C, 4 * C, 3));
            sr_out_ = add_conv(rng, "sr.out", C, 3, 3, 1, kOutputInitGain);
        }
        if (c.has_align()) {
            for (int s = 0; s < c.alignment_stages; ++s) {
                const std::string base = "align.stage" + std::to_string(s + 1);
                Stage st;
                if (s > 0) st.merge = add_conv(rng, base + ".merge", C + K, C, 3);
                const int blocks = s == 0 ? 2 : 3;
                for (int b = 0; b < blocks; ++b) st.blocks.push_back(add_res(rng, base + ".res" + std::to_string(b)));
                st.proj = add_conv(rng, base + ".proj", C, K, 3, 1, kOutputInitGain);
                stages_.push_back(std::move(st));
            }
        }
    }

    static Var conv(Tape* tape, const Var& x, const Conv& c) {
        return nn::conv2d(tape, x, *c.weight, *c.bias, c.stride);
    }

    static Var residual(Tape* tape, const Var& x, const ResBlock& b) {
        return nn::add(tape, x, conv(tape, nn::relu(tape, conv(tape, x, b.c1)), b.c2));
    }

    static Var level(Tape* tape, const Var& x, const std::vector<ResBlock>& blocks) {
        Var h = nn::maxpool2(tape, x);
        for (const auto& b : blocks) h = residual(tape, h, b);
        return h;
    }

    ModelConfig config_;
    std::vector<std::unique_ptr<nn::Param<T>>> params_;
    std::unordered_map<std::string, std::size_t> index_;

    Conv enc_conv0_;
    ResBlock enc_res0_;
    std::vector<ResBlock> levels_[3];
    std::vector<ResBlock> extract_;
    std::vector<Conv> fuse_g_, fuse_merge_;
    std::vector<ResBlock> sr_res_;
    std::vector<Conv> sr_skip_, sr_up_;
    Conv sr_out_;
    std::vector<Stage> stages_;
};

}  // namespace jasr
