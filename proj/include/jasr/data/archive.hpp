#pragma once

#include <jasr/core/error.hpp>
#include <jasr/data/sample.hpp>

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace jasr {

static_assert(std::endian::native == std::endian::little, "archive and checkpoint I/O assume a little-endian host");

/// Random-access collection of samples.
class SampleSource {
public:
    virtual ~SampleSource() = default;
    virtual std::size_t size() const = 0;
    virtual FaceSample at(std::size_t i) const = 0;
    virtual std::size_t num_landmarks() const = 0;
    virtual std::string profile() const = 0;
    /// Index of the annotated record sample i was derived from (augmented
    /// copies share it). Used to keep copies on one side of a split.
    virtual std::size_t source_of(std::size_t i) const { return i; }
};

class InMemoryDataset : public SampleSource {
public:
    InMemoryDataset() = default;
    InMemoryDataset(std::vector<FaceSample> samples, std::string profile, std::vector<std::size_t> sources = {})
        : samples_(std::move(samples)), profile_(std::move(profile)), sources_(std::move(sources)) {
        if (!sources_.empty() && sources_.size() != samples_.size())
            throw ConfigError("source index list does not match the sample count");
    }

    std::size_t size() const override { return samples_.size(); }
    FaceSample at(std::size_t i) const override { return samples_.at(i); }
    std::size_t num_landmarks() const override { return samples_.empty() ? 0 : samples_.front().num_landmarks(); }
    std::string profile() const override { return profile_; }
    std::size_t source_of(std::size_t i) const override { return sources_.empty() ? i : sources_.at(i); }

    std::vector<FaceSample>& samples() { return samples_; }
    const std::vector<FaceSample>& samples() const { return samples_; }

private:
    std::vector<FaceSample> samples_;
    std::string profile_;
    std::vector<std::size_t> sources_;
};

/// Subset view over another source.
class IndexedDataset : public SampleSource {
public:
    IndexedDataset(std::shared_ptr<const SampleSource> base, std::vector<std::size_t> indices)
        : base_(std::move(base)), idx_(std::move(indices)) {}

    std::size_t size() const override { return idx_.size(); }
    FaceSample at(std::size_t i) const override { return base_->at(idx_.at(i)); }
    std::size_t num_landmarks() const override { return base_->num_landmarks(); }
    std::string profile() const override { return base_->profile(); }
    std::size_t source_of(std::size_t i) const override { return base_->source_of(idx_.at(i)); }

private:
    std::shared_ptr<const SampleSource> base_;
    std::vector<std::size_t> idx_;
};

/// Container layout:
///
///     "JASRNET-SAMPLES-1\n"
///     u64 little-endian header length
///     JSON index header
///     count records of contiguous float32:
///       hr[3*S*S] lr[3*S*S] heatmaps[K*G*G] landmarks[2K] visible[K] face_box[4]
namespace archive {

inline constexpr char kMagic[] = "JASRNET-SAMPLES-1\n";

inline std::size_t record_floats(std::size_t image, std::size_t grid, std::size_t k) {
    return 6 * image * image + k * grid * grid + 3 * k + 4;
}

inline void write(const std::string& path, const std::vector<FaceSample>& samples, const std::string& profile,
                  const std::vector<std::size_t>& sources = {}) {
    if (samples.empty()) throw ConfigError("refusing to write an empty archive: " + path);
    const std::size_t S = samples.front().image_size();
    const std::size_t G = samples.front().target_heatmaps.width();
    const std::size_t K = samples.front().num_landmarks();
    nlohmann::json ids = nlohmann::json::array();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.image_size() != S || s.num_landmarks() != K || s.target_heatmaps.width() != G)
            throw ShapeError("archive samples must share image size, grid and landmark count");
        ids.push_back({{"id", s.id}, {"source", sources.empty() ? i : sources.at(i)}});
    }
    nlohmann::json header{{"format", "JASRNET-SAMPLES-1"},
                          {"count", samples.size()},
                          {"image_size", S},
                          {"heatmap_size", G},
                          {"num_landmarks", K},
                          {"profile", profile},
                          {"record_floats", record_floats(S, G, K)},
                          {"layout", {"hr", "lr", "heatmaps", "landmarks", "visible", "face_box"}},
                          {"samples", ids}};
    const std::string hdr = header.dump();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open '" + path + "' for writing");
    os.write(kMagic, sizeof(kMagic) - 1);
    const std::uint64_t len = hdr.size();
    os.write(reinterpret_cast<const char*>(&len), sizeof len);
    os.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    std::vector<float> rec;
    for (const auto& s : samples) {
        rec.clear();
        rec.insert(rec.end(), s.hr_image.vec().begin(), s.hr_image.vec().end());
        rec.insert(rec.end(), s.lr_input.vec().begin(), s.lr_input.vec().end());
        rec.insert(rec.end(), s.target_heatmaps.vec().begin(), s.target_heatmaps.vec().end());
        for (const auto& p : s.landmarks.points) {
            rec.push_back(static_cast<float>(p.x));
            rec.push_back(static_cast<float>(p.y));
        }
        for (auto v : s.visible) rec.push_back(static_cast<float>(v));
        for (double v : {s.face_box.x0, s.face_box.y0, s.face_box.x1, s.face_box.y1})
            rec.push_back(static_cast<float>(v));
        os.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size() * sizeof(float)));
    }
    if (!os) throw Error("failed writing '" + path + "'");
}

}  // namespace archive

/// Reads archive records on demand. Not safe for concurrent at() calls.
class ArchiveDataset : public SampleSource {
public:
    explicit ArchiveDataset(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw Error("cannot open archive '" + path + "'");
        char magic[sizeof(archive::kMagic) - 1];
        in_.read(magic, sizeof magic);
        if (!in_ || std::memcmp(magic, archive::kMagic, sizeof magic) != 0)
            throw ParseError("'" + path + "' is not a sample archive");
        std::uint64_t len = 0;
        in_.read(reinterpret_cast<char*>(&len), sizeof len);
        std::string hdr(len, '\0');
        in_.read(hdr.data(), static_cast<std::streamsize>(len));
        if (!in_) throw ParseError("truncated archive header in '" + path + "'");
        try {
            header_ = nlohmann::json::parse(hdr);
            count_ = header_.at("count").get<std::size_t>();
            image_ = header_.at("image_size").get<std::size_t>();
            grid_ = header_.at("heatmap_size").get<std::size_t>();
            k_ = header_.at("num_landmarks").get<std::size_t>();
            profile_ = header_.at("profile").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("bad archive header in '" + path + "': " + e.what());
        }
        data_start_ = sizeof(archive::kMagic) - 1 + sizeof len + len;
    }

    std::size_t size() const override { return count_; }
    std::size_t num_landmarks() const override { return k_; }
    std::string profile() const override { return profile_; }
    std::size_t image_size() const { return image_; }
    std::size_t heatmap_size() const { return grid_; }
    const nlohmann::json& header() const { return header_; }

    std::size_t source_of(std::size_t i) const override { return header_.at("samples").at(i).at("source").get<std::size_t>(); }

    FaceSample at(std::size_t i) const override {
        if (i >= count_) throw ConfigError("archive index out of range");
        const std::size_t n = archive::record_floats(image_, grid_, k_);
        std::vector<float> rec(n);
        in_.clear();
        in_.seekg(static_cast<std::streamoff>(data_start_ + i * n * sizeof(float)));
        in_.read(reinterpret_cast<char*>(rec.data()), static_cast<std::streamsize>(n * sizeof(float)));
        if (!in_) throw ParseError("truncated record " + std::to_string(i) + " in '" + path_ + "'");
        FaceSample s;
        s.id = header_.at("samples").at(i).at("id").get<std::string>();
        auto take = [&, pos = std::size_t{0}](Shape shape) mutable {
            const std::size_t m = shape_size(shape);
            Tensor<float> t(std::move(shape), std::vector<float>(rec.begin() + static_cast<std::ptrdiff_t>(pos),
                                                                  rec.begin() + static_cast<std::ptrdiff_t>(pos + m)));
            pos += m;
            return t;
        };
        s.hr_image = take({3, image_, image_});
        s.lr_input = take({3, image_, image_});
        s.target_heatmaps = take({k_, grid_, grid_});
        Tensor<float> lm = take({k_, 2});
        for (std::size_t k = 0; k < k_; ++k) s.landmarks.points.push_back({lm[2 * k], lm[2 * k + 1]});
        Tensor<float> vis = take({k_});
        for (std::size_t k = 0; k < k_; ++k) s.visible.push_back(vis[k] != 0.0f ? 1 : 0);
        Tensor<float> box = take({4});
        s.face_box = {box[0], box[1], box[2], box[3]};
        return s;
    }

private:
    std::string path_;
    mutable std::ifstream in_;
    nlohmann::json header_;
    std::size_t count_ = 0, image_ = 0, grid_ = 0, k_ = 0;
    std::string profile_;
    std::size_t data_start_ = 0;
};

}  // namespace jasr
