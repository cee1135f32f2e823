#pragma once

#include <jasr/core/error.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace jasr {

enum class FusionMode { add, concat, off };
enum class Heads { sr_only, align_only, both };

/// Training/ablation variants. BL* carry a single head; *_F add intermediate
/// feature fusion; FULL adds the long skip connection on top of JT_F.
enum class Variant { BL_SR, BL_ALIGN, BL_F_SR, BL_F_ALIGN, JT, JT_F, FULL };

inline std::string to_string(FusionMode m) {
    switch (m) {
        case FusionMode::add: return "add";
        case FusionMode::concat: return "concat";
        case FusionMode::off: return "off";
    }
    return "?";
}

inline std::string to_string(Heads h) {
    switch (h) {
        case Heads::sr_only: return "sr_only";
        case Heads::align_only: return "align_only";
        case Heads::both: return "both";
    }
    return "?";
}

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::BL_SR: return "BL_SR";
        case Variant::BL_ALIGN: return "BL_ALIGN";
        case Variant::BL_F_SR: return "BL_F_SR";
        case Variant::BL_F_ALIGN: return "BL_F_ALIGN";
        case Variant::JT: return "JT";
        case Variant::JT_F: return "JT_F";
        case Variant::FULL: return "FULL";
    }
    return "?";
}

inline FusionMode parse_fusion_mode(const std::string& s) {
    if (s == "add") return FusionMode::add;
    if (s == "concat") return FusionMode::concat;
    if (s == "off") return FusionMode::off;
    throw ConfigError("unknown fusion_mode '" + s + "' (expected add, concat or off)");
}

inline Heads parse_heads(const std::string& s) {
    if (s == "sr_only") return Heads::sr_only;
    if (s == "align_only") return Heads::align_only;
    if (s == "both") return Heads::both;
    throw ConfigError("unknown heads '" + s + "' (expected sr_only, align_only or both)");
}

inline Variant parse_variant(const std::string& s) {
    for (Variant v : {Variant::BL_SR, Variant::BL_ALIGN, Variant::BL_F_SR, Variant::BL_F_ALIGN, Variant::JT,
                      Variant::JT_F, Variant::FULL})
        if (to_string(v) == s) return v;
    throw ConfigError("unknown variant '" + s + "'");
}

/// Full architecture description; the network and its parameter count derive from it.
struct ModelConfig {
    int channels = 128;            ///< feature width C
    int extraction_blocks = 32;    ///< residual blocks T in deep feature extraction
    int level_blocks = 3;          ///< residual blocks after each of the three max-pools
    int alignment_stages = 3;      ///< prediction stages S in the alignment head
    int num_landmarks = 68;        ///< K
    FusionMode fusion = FusionMode::add;
    bool long_skip = true;
    Heads heads = Heads::both;
    int input_size = 128;
    int heatmap_size = 16;

    bool has_sr() const noexcept { return heads != Heads::align_only; }
    bool has_align() const noexcept { return heads != Heads::sr_only; }
    bool uses_long_skip() const noexcept { return long_skip && has_sr(); }

    /// Throws ConfigError listing every violated invariant.
    void validate() const {
        std::vector<std::string> bad;
        if (channels <= 0) bad.push_back("channels > 0");
        if (extraction_blocks < 1) bad.push_back("extraction_blocks >= 1");
        if (level_blocks < 1) bad.push_back("level_blocks >= 1");
        if (alignment_stages < 1 || alignment_stages > 3) bad.push_back("alignment_stages in {1,2,3}");
        if (has_align() && num_landmarks < 1) bad.push_back("num_landmarks >= 1");
        if (heatmap_size <= 0 || input_size != heatmap_size * 8)
            bad.push_back("input_size == 8 * heatmap_size (three halvings)");
        if (bad.empty()) return;
        std::string msg = "invalid model config, violated:";
        for (const auto& b : bad) msg += " [" + b + "]";
        throw ConfigError(msg);
    }
};

/// Rewrites the head/fusion/skip flags of a base config for a variant. Variants
/// with fusion keep the base fusion mode (add or concat), defaulting to add.
inline ModelConfig apply_variant(ModelConfig c, Variant v) {
    const FusionMode fused = c.fusion == FusionMode::off ? FusionMode::add : c.fusion;
    switch (v) {
        case Variant::BL_SR: c.heads = Heads::sr_only; c.fusion = FusionMode::off; c.long_skip = false; break;
        case Variant::BL_ALIGN: c.heads = Heads::align_only; c.fusion = FusionMode::off; c.long_skip = false; break;
        case Variant::BL_F_SR: c.heads = Heads::sr_only; c.fusion = fused; c.long_skip = false; break;
        case Variant::BL_F_ALIGN: c.heads = Heads::align_only; c.fusion = fused; c.long_skip = false; break;
        case Variant::JT: c.heads = Heads::both; c.fusion = FusionMode::off; c.long_skip = false; break;
        case Variant::JT_F: c.heads = Heads::both; c.fusion = fused; c.long_skip = false; break;
        case Variant::FULL: c.heads = Heads::both; c.fusion = fused; c.long_skip = true; break;
    }
    return c;
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"channels", c.channels},
                       {"extraction_blocks", c.extraction_blocks},
                       {"level_blocks", c.level_blocks},
                       {"alignment_stages", c.alignment_stages},
                       {"num_landmarks", c.num_landmarks},
                       {"fusion_mode", to_string(c.fusion)},
                       {"long_skip", c.long_skip},
                       {"heads", to_string(c.heads)},
                       {"input_size", c.input_size},
                       {"heatmap_size", c.heatmap_size}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    c.channels = j.at("channels").get<int>();
    c.extraction_blocks = j.at("extraction_blocks").get<int>();
    c.level_blocks = j.at("level_blocks").get<int>();
    c.alignment_stages = j.at("alignment_stages").get<int>();
    c.num_landmarks = j.at("num_landmarks").get<int>();
    c.fusion = parse_fusion_mode(j.at("fusion_mode").get<std::string>());
    c.long_skip = j.at("long_skip").get<bool>();
    c.heads = parse_heads(j.at("heads").get<std::string>());
    c.input_size = j.at("input_size").get<int>();
    c.heatmap_size = j.at("heatmap_size").get<int>();
}

inline bool operator==(const ModelConfig& a, const ModelConfig& b) {
    return nlohmann::json(a) == nlohmann::json(b);
}

/// Closed-form trainable-scalar count for a config; must agree with the built model.
inline std::int64_t count_parameters(const ModelConfig& c) {
    c.validate();
    const std::int64_t C = c.channels, K = c.num_landmarks;
    auto conv = [](std::int64_t in, std::int64_t out, std::int64_t k) { return in * out * k * k + out; };
    const std::int64_t res = 2 * conv(C, C, 3);

    std::int64_t n = conv(3, C, 3) + res;                     // conv0 + first residual block -> H0
    n += res * (3 * c.level_blocks + c.extraction_blocks);  // three pooled levels + deep extraction
    if (c.fusion != FusionMode::off) {
        n += 3 * conv(C, C, 3);                                    // g1..g3, stride 2
        if (c.fusion == FusionMode::concat) n += 3 * conv(2 * C, C, 3);  // merge after concatenation
    }
    if (c.has_sr()) {
        n += 2 * res;
        if (c.uses_long_skip()) n += 3 * conv(C, C, 3);
        n += 3 * conv(C, 4 * C, 3) + conv(C, 3, 3);
    }
    if (c.has_align()) {
        n += 2 * res + conv(C, K, 3);
        n += (c.alignment_stages - 1) * (conv(C + K, C, 3) + 3 * res + conv(C, K, 3));
    }
    return n;
}

}  // namespace jasr
