#pragma once

#include <jasr/core/error.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace jasr {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

/// Landmark coordinates in pixels, origin at the top-left pixel, in file order.
struct LandmarkSet {
    std::vector<Point2> points;

    std::size_t size() const noexcept { return points.size(); }
    Point2& operator[](std::size_t i) { return points[i]; }
    const Point2& operator[](std::size_t i) const { return points[i]; }

    bool all_finite() const {
        for (const auto& p : points)
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) return false;
        return true;
    }

    friend bool operator==(const LandmarkSet&, const LandmarkSet&) = default;
};

/// Axis-aligned box (x0, y0) - (x1, y1) in pixels.
struct FaceBox {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    double width() const noexcept { return x1 - x0; }
    double height() const noexcept { return y1 - y0; }
    double area() const noexcept { return width() * height(); }

    friend bool operator==(const FaceBox&, const FaceBox&) = default;
};

enum class NormMode { interocular, bbox_sqrt_area };

/// Per-dataset landmark conventions: point count, left/right mirror map used by
/// horizontal flips, and the NME normalization.
struct DatasetProfile {
    std::string name;
    std::size_t num_landmarks = 0;
    std::optional<std::vector<std::size_t>> mirror;
    NormMode norm = NormMode::bbox_sqrt_area;
    std::size_t left_eye_outer = 36, right_eye_outer = 45;
};

namespace detail {

inline std::vector<std::size_t> mirror_300w() {
    std::vector<std::size_t> m(68);
    for (std::size_t i = 0; i < 68; ++i) m[i] = i;
    auto pair = [&](std::size_t a, std::size_t b) {
        m[a] = b;
        m[b] = a;
    };
    for (std::size_t i = 0; i < 8; ++i) pair(i, 16 - i);             // jaw
    for (std::size_t i = 0; i < 5; ++i) pair(17 + i, 26 - i);        // brows
    pair(31, 35), pair(32, 34);                                      // nostrils
    pair(36, 45), pair(37, 44), pair(38, 43), pair(39, 42), pair(40, 47), pair(41, 46);  // eyes
    pair(48, 54), pair(49, 53), pair(50, 52), pair(55, 59), pair(56, 58);                // outer lip
    pair(60, 64), pair(61, 63), pair(65, 67);                                            // inner lip
    return m;
}

inline std::vector<std::size_t> mirror_aflw19() {
    return {5, 4, 3, 2, 1, 0, 11, 10, 9, 8, 7, 6, 14, 13, 12, 17, 16, 15, 18};
}

}  // namespace detail

/// Known profiles: "300w" (68 points), "aflw" (19), "helen" (194), "custom:K".
inline DatasetProfile profile_from_name(const std::string& name) {
    if (name == "300w") return {"300w", 68, detail::mirror_300w(), NormMode::interocular, 36, 45};
    if (name == "aflw") return {"aflw", 19, detail::mirror_aflw19(), NormMode::bbox_sqrt_area, 0, 0};
    if (name == "helen") return {"helen", 194, std::nullopt, NormMode::bbox_sqrt_area, 0, 0};
    if (name.rfind("custom:", 0) == 0) {
        std::size_t k = 0;
        const char* b = name.data() + 7;
        const char* e = name.data() + name.size();
        auto [p, ec] = std::from_chars(b, e, k);
        if (ec != std::errc{} || p != e || k == 0) throw ConfigError("bad custom profile '" + name + "'");
        return {name, k, std::nullopt, NormMode::bbox_sqrt_area, 0, 0};
    }
    throw ConfigError("unknown dataset profile '" + name + "' (expected 300w, aflw, helen or custom:K)");
}

/// Horizontal flip within an image of the given width: x <- (width - 1) - x,
/// with indices exchanged through the profile's mirror permutation.
inline LandmarkSet flip_landmarks(const LandmarkSet& in, const std::vector<std::size_t>& mirror, int width) {
    if (mirror.size() != in.size())
        throw ConfigError("mirror permutation has " + std::to_string(mirror.size()) + " entries for " +
                          std::to_string(in.size()) + " landmarks");
    LandmarkSet out;
    out.points.resize(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        const Point2& p = in[mirror[i]];
        out[i] = {static_cast<double>(width - 1) - p.x, p.y};
    }
    return out;
}

/// Tight bounding box of the points.
inline FaceBox tight_box(const LandmarkSet& lm) {
    if (lm.size() == 0) throw ConfigError("bounding box of an empty landmark set");
    FaceBox b{lm[0].x, lm[0].y, lm[0].x, lm[0].y};
    for (const auto& p : lm.points) {
        b.x0 = std::min(b.x0, p.x);
        b.y0 = std::min(b.y0, p.y);
        b.x1 = std::max(b.x1, p.x);
        b.y1 = std::max(b.y1, p.y);
    }
    return b;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view tok, double& out) {
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc{} && p == tok.data() + tok.size() && std::isfinite(out);
}

}  // namespace detail

/// Parses a ".pts" annotation document:
///
///     version: 1
///     n_points: K
///     {
///     x y        (K lines)
///     }
inline LandmarkSet parse_landmark_file(std::string_view text) {
    std::vector<std::string_view> lines;
    for (std::size_t start = 0; start <= text.size();) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        lines.push_back(detail::trim(text.substr(start, end - start)));
        start = end + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();

    auto header_value = [&](std::size_t idx, std::string_view key) -> std::string_view {
        if (idx >= lines.size() || lines[idx].rfind(key, 0) != 0 || lines[idx].size() <= key.size() ||
            lines[idx][key.size()] != ':')
            throw ParseError("malformed header: expected '" + std::string(key) + ": ...'", idx + 1);
        return detail::trim(lines[idx].substr(key.size() + 1));
    };

    header_value(0, "version");
    const std::string_view count_tok = header_value(1, "n_points");
    std::size_t count = 0;
    {
        auto [p, ec] = std::from_chars(count_tok.data(), count_tok.data() + count_tok.size(), count);
        if (ec != std::errc{} || p != count_tok.data() + count_tok.size())
            throw ParseError("malformed header: n_points is not an integer", 2);
    }
    if (lines.size() < 3 || lines[2] != "{") throw ParseError("malformed header: expected '{'", 3);

    LandmarkSet out;
    std::size_t i = 3;
    for (; i < lines.size() && lines[i] != "}"; ++i) {
        std::string_view l = lines[i];
        const std::size_t sep = l.find_first_of(" \t");
        if (sep == std::string_view::npos) throw ParseError("non-numeric coordinate: '" + std::string(l) + "'", i + 1);
        Point2 pt;
        if (!detail::parse_double(l.substr(0, sep), pt.x) || !detail::parse_double(detail::trim(l.substr(sep)), pt.y))
            throw ParseError("non-numeric coordinate: '" + std::string(l) + "'", i + 1);
        out.points.push_back(pt);
    }
    if (i >= lines.size()) throw ParseError("malformed document: missing closing '}'", lines.size());
    if (out.size() != count)
        throw ParseError("point-count mismatch: header declares " + std::to_string(count) + ", found " +
                             std::to_string(out.size()),
                         i + 1);
    if (i + 1 != lines.size()) throw ParseError("unexpected content after '}'", i + 2);
    return out;
}

/// Writes the annotation format with shortest round-trip decimal coordinates.
inline std::string serialize_landmarks(const LandmarkSet& lm) {
    std::string s = "version: 1\nn_points: " + std::to_string(lm.size()) + "\n{\n";
    char buf[64];
    for (const auto& p : lm.points) {
        auto r = std::to_chars(buf, buf + sizeof buf, p.x);
        s.append(buf, r.ptr);
        s += ' ';
        r = std::to_chars(buf, buf + sizeof buf, p.y);
        s.append(buf, r.ptr);
        s += '\n';
    }
    s += "}\n";
    return s;
}

}  // namespace jasr
