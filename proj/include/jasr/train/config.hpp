#pragma once

#include <jasr/core/error.hpp>
#include <jasr/data/landmarks.hpp>
#include <jasr/model/config.hpp>

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace jasr {

struct LrDrop {
    int epoch = 0;
    double factor = 1.0;

    friend bool operator==(const LrDrop&, const LrDrop&) = default;
};

struct TrainConfig {
    double base_lr = 5e-5;
    std::vector<LrDrop> lr_drops{{20, 0.5}, {30, 0.5}};
    int batch_size = 8;
    int epochs = 40;
    double alpha = 1.0;  ///< heatmap loss weight
    std::uint64_t seed = 0;
    Variant variant = Variant::FULL;
    bool deep_supervision = true;
    double validation_fraction = 0.1;  ///< used only when no separate validation split is given
    int checkpoint_every = 1;          ///< epoch_NNN checkpoints; 0 keeps only last and best

    void validate() const {
        std::vector<std::string> bad;
        if (!(base_lr > 0.0)) bad.push_back("base_lr must be > 0");
        if (epochs < 1) bad.push_back("epochs must be ≥ 1");
        if (batch_size < 1) bad.push_back("batch_size must be ≥ 1");
        if (alpha < 0.0) bad.push_back("alpha must be ≥ 0");
        if (validation_fraction < 0.0 || validation_fraction >= 1.0) bad.push_back("validation_fraction must be in [0, 1)");
        if (checkpoint_every < 0) bad.push_back("checkpoint_every must be ≥ 0");
        for (const auto& d : lr_drops)
            if (d.epoch < 0 || !(d.factor > 0.0)) bad.push_back("lr_drops entries need epoch ≥ 0 and factor > 0");
        if (bad.empty()) return;
        std::string msg = bad.front();
        for (std::size_t i = 1; i < bad.size(); ++i) msg += "; " + bad[i];
        throw ConfigError(msg);
    }
};

/// Piecewise-constant learning rate: base_lr times every drop whose epoch has been reached.
inline double lr_at(const TrainConfig& c, int epoch) {
    if (epoch < 0 || epoch >= c.epochs)
        throw ConfigError("epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(c.epochs) + ")");
    double lr = c.base_lr;
    for (const auto& d : c.lr_drops)
        if (epoch >= d.epoch) lr *= d.factor;
    return lr;
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    nlohmann::json drops = nlohmann::json::array();
    for (const auto& d : c.lr_drops) drops.push_back({d.epoch, d.factor});
    j = nlohmann::json{{"base_lr", c.base_lr},
                       {"lr_drops", drops},
                       {"batch_size", c.batch_size},
                       {"epochs", c.epochs},
                       {"alpha", c.alpha},
                       {"seed", c.seed},
                       {"variant", to_string(c.variant)},
                       {"deep_supervision", c.deep_supervision},
                       {"validation_fraction", c.validation_fraction},
                       {"checkpoint_every", c.checkpoint_every}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    c.base_lr = j.at("base_lr").get<double>();
    c.lr_drops.clear();
    for (const auto& d : j.at("lr_drops")) c.lr_drops.push_back({d.at(0).get<int>(), d.at(1).get<double>()});
    c.batch_size = j.at("batch_size").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.alpha = j.at("alpha").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.deep_supervision = j.at("deep_supervision").get<bool>();
    c.validation_fraction = j.at("validation_fraction").get<double>();
    c.checkpoint_every = j.at("checkpoint_every").get<int>();
}

/// Everything a training run needs, as read from an experiment file.
struct ExperimentConfig {
    ModelConfig model;  ///< variant already applied
    TrainConfig train;
    std::string profile = "300w";
    std::string train_data;  ///< prepared archive
    std::string val_data;    ///< optional; otherwise a held-out fraction of train_data
    std::string out_dir = "runs/default";
};

namespace detail {

template <class N>
N parse_number(std::string_view key, std::string_view v, std::size_t line) {
    N out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ParseError("bad value '" + std::string(v) + "' for key '" + std::string(key) + "'", line);
    return out;
}

inline bool parse_bool(std::string_view key, std::string_view v, std::size_t line) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ParseError("bad boolean '" + std::string(v) + "' for key '" + std::string(key) + "'", line);
}

// "20:0.5, 30:0.5" or "none"
inline std::vector<LrDrop> parse_drops(std::string_view v, std::size_t line) {
    std::vector<LrDrop> out;
    if (v == "none" || v.empty()) return out;
    std::size_t start = 0;
    while (start <= v.size()) {
        std::size_t end = v.find(',', start);
        if (end == std::string_view::npos) end = v.size();
        const std::string_view item = trim(v.substr(start, end - start));
        const std::size_t colon = item.find(':');
        if (colon == std::string_view::npos)
            throw ParseError("lr_drops entries must look like epoch:factor, got '" + std::string(item) + "'", line);
        out.push_back({parse_number<int>("lr_drops", trim(item.substr(0, colon)), line),
                       parse_number<double>("lr_drops", trim(item.substr(colon + 1)), line)});
        start = end + 1;
    }
    return out;
}

}  // namespace detail

inline std::string format_lr_drops(const std::vector<LrDrop>& drops) {
    if (drops.empty()) return "none";
    std::ostringstream os;
    for (std::size_t i = 0; i < drops.size(); ++i) os << (i ? "," : "") << drops[i].epoch << ':' << drops[i].factor;
    return os.str();
}

/// Parses a flat "key = value" document. Blank lines and '#' comments are
/// ignored; unknown or repeated keys are errors. Model keys describe the base
/// network; the variant then rewrites its head, fusion and skip flags.
inline ExperimentConfig parse_experiment_config(std::string_view text) {
    ExperimentConfig cfg;
    ModelConfig& m = cfg.model;
    TrainConfig& t = cfg.train;
    std::map<std::string, std::size_t> seen;
    std::optional<int> num_landmarks;

    std::size_t line_no = 0;
    for (std::size_t start = 0; start < text.size();) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected 'key = value', got '" + std::string(line) + "'", line_no);
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string_view v = detail::trim(line.substr(eq + 1));
        if (auto [it, fresh] = seen.emplace(key, line_no); !fresh)
            throw ParseError("key '" + key + "' repeated (first set on line " + std::to_string(it->second) + ")", line_no);

        if (key == "base_lr") t.base_lr = detail::parse_number<double>(key, v, line_no);
        else if (key == "lr_drops") t.lr_drops = detail::parse_drops(v, line_no);
        else if (key == "batch_size") t.batch_size = detail::parse_number<int>(key, v, line_no);
        else if (key == "epochs") t.epochs = detail::parse_number<int>(key, v, line_no);
        else if (key == "alpha") t.alpha = detail::parse_number<double>(key, v, line_no);
        else if (key == "seed") t.seed = detail::parse_number<std::uint64_t>(key, v, line_no);
        else if (key == "variant") t.variant = parse_variant(std::string(v));
        else if (key == "deep_supervision") t.deep_supervision = detail::parse_bool(key, v, line_no);
        else if (key == "validation_fraction") t.validation_fraction = detail::parse_number<double>(key, v, line_no);
        else if (key == "checkpoint_every") t.checkpoint_every = detail::parse_number<int>(key, v, line_no);
        else if (key == "channels") m.channels = detail::parse_number<int>(key, v, line_no);
        else if (key == "extraction_blocks") m.extraction_blocks = detail::parse_number<int>(key, v, line_no);
        else if (key == "level_blocks") m.level_blocks = detail::parse_number<int>(key, v, line_no);
        else if (key == "alignment_stages") m.alignment_stages = detail::parse_number<int>(key, v, line_no);
        else if (key == "num_landmarks") num_landmarks = detail::parse_number<int>(key, v, line_no);
        else if (key == "fusion_mode") m.fusion = parse_fusion_mode(std::string(v));
        else if (key == "profile") cfg.profile = std::string(v);
        else if (key == "train_data") cfg.train_data = std::string(v);
        else if (key == "val_data") cfg.val_data = std::string(v);
        else if (key == "out_dir") cfg.out_dir = std::string(v);
        else throw ParseError("unknown config key '" + key + "'", line_no);
    }

    const DatasetProfile profile = profile_from_name(cfg.profile);
    m.num_landmarks = num_landmarks.value_or(static_cast<int>(profile.num_landmarks));
    if (m.num_landmarks != static_cast<int>(profile.num_landmarks))
        throw ConfigError("num_landmarks = " + std::to_string(m.num_landmarks) + " contradicts profile '" +
                          cfg.profile + "' (" + std::to_string(profile.num_landmarks) + " points)");
    t.validate();
    m = apply_variant(m, t.variant);
    m.validate();
    return cfg;
}

/// Inverse of parse_experiment_config for the keys it understands.
inline std::string format_experiment_config(const ExperimentConfig& c) {
    std::ostringstream os;
    os.precision(17);
    const TrainConfig& t = c.train;
    const ModelConfig& m = c.model;
    os << "variant = " << to_string(t.variant) << "\n"
       << "base_lr = " << t.base_lr << "\n"
       << "lr_drops = " << format_lr_drops(t.lr_drops) << "\n"
       << "batch_size = " << t.batch_size << "\n"
       << "epochs = " << t.epochs << "\n"
       << "alpha = " << t.alpha << "\n"
       << "seed = " << t.seed << "\n"
       << "deep_supervision = " << (t.deep_supervision ? "true" : "false") << "\n"
       << "validation_fraction = " << t.validation_fraction << "\n"
       << "checkpoint_every = " << t.checkpoint_every << "\n"
       << "channels = " << m.channels << "\n"
       << "extraction_blocks = " << m.extraction_blocks << "\n"
       << "level_blocks = " << m.level_blocks << "\n"
       << "alignment_stages = " << m.alignment_stages << "\n"
       << "num_landmarks = " << m.num_landmarks << "\n"
       << "fusion_mode = " << to_string(m.fusion == FusionMode::off ? FusionMode::add : m.fusion) << "\n"
       << "profile = " << c.profile << "\n";
    if (!c.train_data.empty()) os << "train_data = " << c.train_data << "\n";
    if (!c.val_data.empty()) os << "val_data = " << c.val_data << "\n";
    os << "out_dir = " << c.out_dir << "\n";
    return os.str();
}

}  // namespace jasr
