#pragma once

// OpenCV-backed file I/O. Link against opencv_core, opencv_imgproc and
// opencv_imgcodecs when including this header.

#include <jasr/core/error.hpp>
#include <jasr/core/tensor.hpp>
#include <jasr/data/landmarks.hpp>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace jasr::io {

/// Decodes any format OpenCV reads into a 3 x H x W RGB tensor in [0, 1].
/// Grayscale is replicated; alpha is dropped; 16-bit inputs are scaled by 65535.
inline Tensor<float> read_image(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_COLOR);
    if (m.empty()) throw Error("cannot decode image '" + path.string() + "'");
    const double scale = m.depth() == CV_16U ? 1.0 / 65535.0 : m.depth() == CV_8U ? 1.0 / 255.0 : 1.0;
    cv::Mat f;
    m.convertTo(f, CV_32FC3, scale);
    const std::size_t h = static_cast<std::size_t>(f.rows), w = static_cast<std::size_t>(f.cols);
    Tensor<float> out({3, h, w});
    for (std::size_t y = 0; y < h; ++y) {
        const auto* row = f.ptr<cv::Vec3f>(static_cast<int>(y));
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) out.at(c, y, x) = std::clamp(row[x][2 - static_cast<int>(c)], 0.0f, 1.0f);
    }
    return out;
}

/// 8-bit BGR matrix from a 3 x H x W RGB tensor (values clamped to [0, 1]).
template <class T>
cv::Mat to_mat(const Tensor<T>& rgb) {
    if (rgb.rank() != 3 || rgb.channels() != 3) throw ShapeError("expected a 3 x H x W image, got " + shape_str(rgb.shape()));
    cv::Mat m(static_cast<int>(rgb.height()), static_cast<int>(rgb.width()), CV_8UC3);
    for (std::size_t y = 0; y < rgb.height(); ++y) {
        auto* row = m.ptr<cv::Vec3b>(static_cast<int>(y));
        for (std::size_t x = 0; x < rgb.width(); ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = std::clamp(static_cast<double>(rgb.at(c, y, x)), 0.0, 1.0);
                row[x][2 - static_cast<int>(c)] = static_cast<unsigned char>(std::lround(255.0 * v));
            }
    }
    return m;
}

inline void write_mat(const std::filesystem::path& path, const cv::Mat& m) {
    if (!cv::imwrite(path.string(), m)) throw Error("cannot write image '" + path.string() + "'");
}

template <class T>
void write_image(const std::filesystem::path& path, const Tensor<T>& rgb) {
    write_mat(path, to_mat(rgb));
}

/// Draws one filled marker per landmark onto a copy of the image, upscaled by
/// `zoom` so markers stay legible on 128 px faces.
template <class T>
cv::Mat landmark_overlay(const Tensor<T>& rgb, const LandmarkSet& lm, int zoom = 4) {
    cv::Mat base = to_mat(rgb), big;
    cv::resize(base, big, cv::Size(base.cols * zoom, base.rows * zoom), 0, 0, cv::INTER_NEAREST);
    for (const auto& p : lm.points) {
        // pixel centers: index i spans [i, i + 1) before zooming
        const cv::Point c(static_cast<int>(std::lround((p.x + 0.5) * zoom)), static_cast<int>(std::lround((p.y + 0.5) * zoom)));
        cv::circle(big, c, std::max(2, zoom / 2 + 1), cv::Scalar(0, 255, 0), cv::FILLED, cv::LINE_AA);
    }
    return big;
}

struct Series {
    std::string name;
    std::vector<double> x, y;
    std::array<int, 3> bgr{200, 80, 20};
};

/// Line chart rendered to a PNG-ready matrix: axes box, min/max labels, legend.
/// Non-finite points are skipped.
inline cv::Mat line_plot(const std::string& title, const std::string& x_label, const std::vector<Series>& series,
                         bool log_y = false, int width = 800, int height = 480) {
    cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
    const int left = 80, right = 20, top = 40, bottom = 50;
    const cv::Rect area(left, top, width - left - right, height - top - bottom);
    auto ty = [&](double v) { return log_y ? std::log10(std::max(v, 1e-12)) : v; };

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1, y0 -= 1;

    cv::rectangle(img, area, cv::Scalar(0, 0, 0), 1);
    const auto font = cv::FONT_HERSHEY_SIMPLEX;
    auto label = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4g", v);
        return std::string(buf);
    };
    auto y_label = [&](double v) { return label(log_y ? std::pow(10.0, v) : v); };
    cv::putText(img, title, cv::Point(left, 25), font, 0.6, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    cv::putText(img, y_label(y1), cv::Point(5, top + 10), font, 0.4, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    cv::putText(img, y_label(y0), cv::Point(5, top + area.height), font, 0.4, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    cv::putText(img, label(x0), cv::Point(left, height - 30), font, 0.4, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    cv::putText(img, label(x1), cv::Point(width - right - 60, height - 30), font, 0.4, cv::Scalar(0, 0, 0), 1,
                cv::LINE_AA);
    cv::putText(img, x_label, cv::Point(left + area.width / 2 - 20, height - 12), font, 0.5, cv::Scalar(0, 0, 0), 1,
                cv::LINE_AA);

    int legend_y = top + 18;
    for (const auto& s : series) {
        const cv::Scalar color(s.bgr[0], s.bgr[1], s.bgr[2]);
        std::vector<cv::Point> pts;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            const double u = (s.x[i] - x0) / (x1 - x0), v = (ty(s.y[i]) - y0) / (y1 - y0);
            pts.emplace_back(area.x + static_cast<int>(u * (area.width - 1)),
                             area.y + area.height - 1 - static_cast<int>(v * (area.height - 1)));
        }
        if (pts.size() == 1) cv::circle(img, pts[0], 3, color, cv::FILLED);
        if (pts.size() > 1) cv::polylines(img, pts, false, color, 1, cv::LINE_AA);
        cv::line(img, cv::Point(area.x + area.width - 170, legend_y - 4), cv::Point(area.x + area.width - 145, legend_y - 4),
                 color, 2);
        cv::putText(img, s.name, cv::Point(area.x + area.width - 140, legend_y), font, 0.45, cv::Scalar(0, 0, 0), 1,
                    cv::LINE_AA);
        legend_y += 18;
    }
    return img;
}

}  // namespace jasr::io
