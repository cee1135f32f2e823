#pragma once

#include <jasr/core/error.hpp>
#include <jasr/data/landmarks.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace jasr {

/// One manifest line: image path, annotation path, optional head box.
struct ManifestRecord {
    std::filesystem::path image;
    std::filesystem::path annotation;
    std::optional<FaceBox> box;
    std::size_t line = 0;
};

/// Tab-separated, one record per line:
///     image<TAB>annotation[<TAB>x0<TAB>y0<TAB>x1<TAB>y1]
/// Blank lines and lines starting with '#' are skipped. Relative paths are
/// resolved against `root`.
inline std::vector<ManifestRecord> parse_manifest(std::string_view text, const std::filesystem::path& root) {
    std::vector<ManifestRecord> out;
    std::size_t line_no = 0;
    std::istringstream is{std::string(text)};
    for (std::string line; std::getline(is, line);) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        std::vector<std::string> f;
        std::size_t start = 0;
        for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1)
            f.push_back(line.substr(start, tab - start));
        f.push_back(line.substr(start));
        if (f.size() != 2 && f.size() != 6)
            throw ParseError("manifest record needs 2 or 6 tab-separated fields, got " + std::to_string(f.size()),
                             line_no);
        ManifestRecord r;
        r.line = line_no;
        auto resolve = [&](const std::string& p) {
            std::filesystem::path path(p);
            return path.is_absolute() ? path : root / path;
        };
        r.image = resolve(f[0]);
        r.annotation = resolve(f[1]);
        if (f.size() == 6) {
            double v[4];
            for (int i = 0; i < 4; ++i)
                if (!detail::parse_double(detail::trim(f[2 + i]), v[i]))
                    throw ParseError("non-numeric box coordinate '" + f[2 + i] + "'", line_no);
            r.box = FaceBox{v[0], v[1], v[2], v[3]};
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline std::string read_text_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Head-region box derived from landmarks when the manifest gives none: square,
/// centered on the landmark box, side 1.3x its larger dimension.
inline FaceBox head_box_from_landmarks(const LandmarkSet& lm) {
    const FaceBox t = tight_box(lm);
    const double cx = 0.5 * (t.x0 + t.x1), cy = 0.5 * (t.y0 + t.y1);
    const double half = 0.65 * std::max(t.width(), t.height());
    return {cx - half, cy - half, cx + half, cy + half};
}

}  // namespace jasr
