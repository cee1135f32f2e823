#pragma once

#include <jasr/core/rng.hpp>
#include <jasr/data/landmarks.hpp>
#include <jasr/data/sample.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace jasr::synthetic {

/// Mean 68-point face in a 128 x 128 frame, mirror-symmetric about x = 63.5
/// under the 300W mirror map.
inline LandmarkSet template_68() {
    std::vector<Point2> p(68);
    std::vector<bool> set(68, false);
    auto put = [&](std::size_t i, double x, double y) {
        p[i] = {x, y};
        set[i] = true;
    };
    const double cx = 63.5;
    for (std::size_t i = 0; i <= 8; ++i) {
        const double th = std::numbers::pi * static_cast<double>(i) / 16.0;
        put(i, cx - 40.0 * std::cos(th), 58.0 + 50.0 * std::sin(th));
    }
    for (std::size_t j = 0; j < 5; ++j) {
        const double t = static_cast<double>(j) / 4.0;
        put(17 + j, 34.0 + 24.0 * t, 45.0 - 5.0 * std::sin(std::numbers::pi * (0.2 + 0.7 * t)));
    }
    put(27, cx, 50), put(28, cx, 57), put(29, cx, 64), put(30, cx, 71);
    put(31, 55, 76), put(32, 59, 78), put(33, cx, 79.5);
    put(36, 39, 54), put(37, 44, 50.5), put(38, 50, 50.5), put(39, 55, 54), put(40, 50, 57.5), put(41, 44, 57.5);
    put(48, 49, 90), put(49, 54, 87), put(50, 59, 85.5), put(51, cx, 86.5);
    put(57, cx, 97), put(58, 58, 96), put(59, 53.5, 94);
    put(60, 52, 90.5), put(61, 58, 89), put(62, cx, 89.5), put(66, cx, 92), put(67, 58, 92);

    const auto mirror = profile_from_name("300w").mirror.value();
    for (std::size_t i = 0; i < 68; ++i)
        if (!set[i]) p[i] = {127.0 - p[mirror[i]].x, p[mirror[i]].y};
    return LandmarkSet{p};
}

/// Random plausible landmark layout: template under a jittered similarity,
/// per-point noise and a random mouth opening.
inline LandmarkSet random_landmarks_68(Rng& rng, double pose_jitter = 1.0) {
    LandmarkSet lm = template_68();
    const double open = rng.uniform(0.0, 4.0);
    for (std::size_t i : {56u, 57u, 58u, 65u, 66u, 67u}) lm[i].y += open;
    const double s = 1.0 + pose_jitter * rng.uniform(-0.06, 0.06);
    const double th = pose_jitter * rng.uniform(-8.0, 8.0) * std::numbers::pi / 180.0;
    const double dx = pose_jitter * rng.uniform(-4.0, 4.0), dy = pose_jitter * rng.uniform(-4.0, 4.0);
    const double c = 63.5;
    for (auto& p : lm.points) {
        const double x = p.x - c, y = p.y - c;
        p = {c + s * (std::cos(th) * x - std::sin(th) * y) + dx + 0.6 * rng.normal(),
             c + s * (std::sin(th) * x + std::cos(th) * y) + dy + 0.6 * rng.normal()};
    }
    return lm;
}

namespace detail {

using Rgb = std::array<double, 3>;

inline bool inside(const std::vector<Point2>& poly, double x, double y) {
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Point2 &a = poly[i], &b = poly[j];
        if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) in = !in;
    }
    return in;
}

inline double segment_distance(Point2 a, Point2 b, double x, double y) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? ((x - a.x) * vx + (y - a.y) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double px = a.x + t * vx - x, py = a.y + t * vy - y;
    return std::sqrt(px * px + py * py);
}

inline double polyline_distance(const LandmarkSet& lm, std::size_t from, std::size_t to, double x, double y) {
    double d = 1e9;
    for (std::size_t i = from; i < to; ++i) d = std::min(d, segment_distance(lm[i], lm[i + 1], x, y));
    return d;
}

inline std::vector<Point2> ring(const LandmarkSet& lm, std::size_t from, std::size_t to) {
    return {lm.points.begin() + static_cast<std::ptrdiff_t>(from), lm.points.begin() + static_cast<std::ptrdiff_t>(to + 1)};
}

}  // namespace detail

/// Draws a cartoon face for 68 landmarks given in pixel coordinates of a
/// size x size canvas. `unit` scales stroke widths (1 for a 128 px face).
inline Tensor<float> render_face(const LandmarkSet& lm, std::size_t size, Rng& rng, double unit = 1.0) {
    using detail::Rgb;
    const Rgb bg_top{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
    const Rgb bg_bottom{rng.uniform(0.1, 0.6), rng.uniform(0.1, 0.6), rng.uniform(0.1, 0.6)};
    const double tone = rng.uniform(0.55, 0.95);
    const Rgb skin{tone, tone * rng.uniform(0.72, 0.85), tone * rng.uniform(0.55, 0.7)};
    const Rgb hair{rng.uniform(0.05, 0.35), rng.uniform(0.03, 0.25), rng.uniform(0.0, 0.15)};
    const Rgb iris{rng.uniform(0.1, 0.4), rng.uniform(0.1, 0.45), rng.uniform(0.1, 0.5)};
    const Rgb lips{rng.uniform(0.55, 0.85), rng.uniform(0.2, 0.35), rng.uniform(0.25, 0.4)};

    // face outline: jaw plus an arc over the forehead
    std::vector<Point2> face = detail::ring(lm, 0, 16);
    const Point2 l = lm[0], r = lm[16];
    const double mx = 0.5 * (l.x + r.x), my = 0.5 * (l.y + r.y);
    const double rx = 0.5 * std::hypot(r.x - l.x, r.y - l.y);
    const double ang = std::atan2(r.y - l.y, r.x - l.x);
    std::vector<Point2> hairline;
    for (int i = 1; i < 16; ++i) {
        const double t = std::numbers::pi * static_cast<double>(i) / 16.0;
        const double ex = rx * std::cos(t), ey = -0.9 * rx * std::sin(t);
        const Point2 q{mx + std::cos(ang) * ex - std::sin(ang) * ey, my + std::sin(ang) * ex + std::cos(ang) * ey};
        face.push_back(q);
        hairline.push_back(q);
    }
    std::vector<Point2> head;
    for (const auto& q : face) head.push_back({mx + 1.12 * (q.x - mx), my + 1.12 * (q.y - my)});
    const auto eye_l = detail::ring(lm, 36, 41), eye_r = detail::ring(lm, 42, 47);
    const auto mouth = detail::ring(lm, 48, 59), inner = detail::ring(lm, 60, 67);
    auto centroid = [](const std::vector<Point2>& v) {
        Point2 c{};
        for (const auto& q : v) c = {c.x + q.x / v.size(), c.y + q.y / v.size()};
        return c;
    };
    const Point2 cl = centroid(eye_l), cr = centroid(eye_r);
    const double iris_r = 2.6 * unit;

    auto shade = [&](double x, double y) -> Rgb {
        const double t = y / static_cast<double>(size);
        Rgb c{bg_top[0] * (1 - t) + bg_bottom[0] * t, bg_top[1] * (1 - t) + bg_bottom[1] * t,
              bg_top[2] * (1 - t) + bg_bottom[2] * t};
        if (detail::inside(head, x, y) && y < my + 4 * unit) c = hair;
        if (detail::inside(face, x, y)) {
            const double light = 1.0 - 0.25 * std::abs(x - mx) / std::max(rx, 1.0);
            c = {skin[0] * light, skin[1] * light, skin[2] * light};
            if (detail::polyline_distance(lm, 17, 21, x, y) < 1.6 * unit ||
                detail::polyline_distance(lm, 22, 26, x, y) < 1.6 * unit)
                c = hair;
            if (detail::polyline_distance(lm, 27, 30, x, y) < 0.8 * unit ||
                detail::polyline_distance(lm, 31, 35, x, y) < 1.0 * unit)
                c = {c[0] * 0.7, c[1] * 0.7, c[2] * 0.7};
            for (const auto* eye : {&eye_l, &eye_r})
                if (detail::inside(*eye, x, y)) {
                    const Point2 ec = eye == &eye_l ? cl : cr;
                    c = std::hypot(x - ec.x, y - ec.y) < iris_r ? iris : Rgb{0.95, 0.95, 0.93};
                }
            if (detail::inside(mouth, x, y)) c = detail::inside(inner, x, y) ? Rgb{0.15, 0.05, 0.05} : lips;
        }
        return c;
    };

    Tensor<float> img({3, size, size});
    constexpr int ss = 3;  // supersampling per axis
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
            Rgb acc{};
            for (int sy = 0; sy < ss; ++sy)
                for (int sx = 0; sx < ss; ++sx) {
                    const Rgb c = shade(static_cast<double>(x) + (sx + 0.5) / ss - 0.5,
                                        static_cast<double>(y) + (sy + 0.5) / ss - 0.5);
                    for (int k = 0; k < 3; ++k) acc[k] += c[k];
                }
            for (std::size_t k = 0; k < 3; ++k)
                img.at(k, y, x) = static_cast<float>(std::clamp(acc[k] / (ss * ss), 0.0, 1.0));
        }
    return img;
}

/// Ready-to-train 128 x 128 synthetic sample.
inline FaceSample make_face_sample(Rng& rng, std::string id, double pose_jitter = 1.0,
                                   double sigma = kDefaultHeatmapSigma) {
    LandmarkSet lm = random_landmarks_68(rng, pose_jitter);
    Tensor<float> img = render_face(lm, kHrSize, rng);
    return make_sample(std::move(id), std::move(img), std::move(lm), sigma);
}

inline std::vector<FaceSample> make_face_samples(std::uint64_t seed, std::size_t n, double pose_jitter = 1.0) {
    std::vector<FaceSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = Rng::stream(seed, i);
        out.push_back(make_face_sample(rng, "synth" + std::to_string(i), pose_jitter));
    }
    return out;
}

}  // namespace jasr::synthetic
