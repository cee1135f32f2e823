#pragma once

#include <jasr/core/csv.hpp>

#include <optional>
#include <string>
#include <vector>

namespace jasr {

/// Per-sample and mean PSNR-Y / SSIM / NME. Metrics a variant does not produce
/// stay empty (an SR-only model has no NME column values).
struct MetricsReport {
    struct Row {
        std::string sample_id;
        std::optional<double> psnr_db, ssim, nme_x100;
    };
    std::vector<Row> rows;

    static std::optional<double> mean_of(const std::vector<Row>& rows, std::optional<double> Row::*field) {
        double s = 0.0;
        std::size_t n = 0;
        for (const auto& r : rows)
            if (r.*field) {
                s += *(r.*field);
                ++n;
            }
        if (n == 0) return std::nullopt;
        return s / static_cast<double>(n);
    }

    std::optional<double> psnr_db() const { return mean_of(rows, &Row::psnr_db); }
    std::optional<double> ssim() const { return mean_of(rows, &Row::ssim); }
    std::optional<double> nme_x100() const { return mean_of(rows, &Row::nme_x100); }

    /// Columns sample_id, psnr_db, ssim, nme_x100; the last row ("mean") is the summary.
    std::string to_csv() const {
        std::vector<csv::Row> out{{"sample_id", "psnr_db", "ssim", "nme_x100"}};
        for (const auto& r : rows) out.push_back({r.sample_id, csv::num(r.psnr_db), csv::num(r.ssim), csv::num(r.nme_x100)});
        out.push_back({"mean", csv::num(psnr_db()), csv::num(ssim()), csv::num(nme_x100())});
        return csv::format(out);
    }
};

}  // namespace jasr
