#include <jasr/data/archive.hpp>
#include <jasr/data/augment.hpp>
#include <jasr/data/synthetic.hpp>

#include <gtest/gtest.h>

#include "test_util.hpp"

#include <cmath>
#include <fstream>

using namespace jasr;

namespace {

AugmentationParams identity_params() {
    AugmentationParams p;
    p.scale_min = p.scale_max = 1.0;
    p.rotation_min_deg = p.rotation_max_deg = 0.0;
    p.flip_probability = 0.0;
    p.copies = 1;
    return p;
}

FaceSample face(std::uint64_t seed) {
    Rng rng(seed);
    return synthetic::make_face_sample(rng, "face" + std::to_string(seed));
}

}  // namespace

TEST(Sample, DerivedFields) {
    const FaceSample s = face(1);
    EXPECT_EQ(s.hr_image.shape(), (Shape{3, 128, 128}));
    EXPECT_EQ(s.lr_input.shape(), (Shape{3, 128, 128}));
    EXPECT_EQ(s.target_heatmaps.shape(), (Shape{68, 16, 16}));
    EXPECT_EQ(s.visible.size(), 68u);
    const FaceBox t = tight_box(s.landmarks);
    EXPECT_LE(s.face_box.x0, t.x0);
    EXPECT_GE(s.face_box.x1, t.x1);
    for (float v : s.lr_input.vec()) {
        ASSERT_GE(v, 0.0f);
        ASSERT_LE(v, 1.0f);
    }
    EXPECT_THROW(make_sample("bad", Tensor<float>({3, 100, 100}), s.landmarks), ShapeError);
    LandmarkSet nan = s.landmarks;
    nan[3].x = std::nan("");
    EXPECT_THROW(make_sample("bad", s.hr_image, nan), ConfigError);
}

TEST(Augment, IdentityParamsAreIdentity) {
    const FaceSample s = face(2);
    Rng rng(0);
    const auto out = augment(s, identity_params(), profile_from_name("300w"), rng);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_LE(max_abs_diff(out[0].hr_image, s.hr_image), 1e-6f);
    EXPECT_LE(max_abs_diff(out[0].lr_input, s.lr_input), 1e-6f);
    EXPECT_LE(max_abs_diff(out[0].target_heatmaps, s.target_heatmaps), 1e-6f);
    for (std::size_t k = 0; k < 68; ++k) {
        EXPECT_NEAR(out[0].landmarks[k].x, s.landmarks[k].x, 1e-9);
        EXPECT_NEAR(out[0].landmarks[k].y, s.landmarks[k].y, 1e-9);
    }
}

TEST(Augment, FifteenCopiesWithIds) {
    const FaceSample s = face(3);
    Rng rng(1);
    const auto out = augment(s, AugmentationParams{}, profile_from_name("300w"), rng);
    ASSERT_EQ(out.size(), 15u);
    EXPECT_EQ(out[0].id, s.id + "#0");
    EXPECT_EQ(out[14].id, s.id + "#14");
}

TEST(Augment, DeterministicPerSeed) {
    const FaceSample s = face(4);
    Rng a(77), b(77), c(78);
    AugmentationParams p;
    p.copies = 3;
    const auto x = augment(s, p, profile_from_name("300w"), a);
    const auto y = augment(s, p, profile_from_name("300w"), b);
    const auto z = augment(s, p, profile_from_name("300w"), c);
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(x[i].hr_image, y[i].hr_image);
        EXPECT_EQ(x[i].landmarks, y[i].landmarks);
    }
    EXPECT_NE(x[0].landmarks, z[0].landmarks);
}

TEST(Augment, HorizontalFlipMirrorsImageAndIndices) {
    const FaceSample s = face(5);
    AugmentationParams p = identity_params();
    p.flip_probability = 1.0;
    Rng rng(0);
    const FaceSample f = augment(s, p, profile_from_name("300w"), rng)[0];
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 128; ++y)
            for (std::size_t x = 0; x < 128; ++x) ASSERT_NEAR(f.hr_image.at(c, y, x), s.hr_image.at(c, y, 127 - x), 1e-6);
    EXPECT_NEAR(f.landmarks[0].x, 127.0 - s.landmarks[16].x, 1e-9);
    EXPECT_NEAR(f.landmarks[0].y, s.landmarks[16].y, 1e-9);
    EXPECT_NEAR(f.landmarks[16].x, 127.0 - s.landmarks[0].x, 1e-9);
    // flipping the flipped sample restores the original
    Rng rng2(0);
    const FaceSample g = augment(f, p, profile_from_name("300w"), rng2)[0];
    EXPECT_LE(max_abs_diff(g.hr_image, s.hr_image), 1e-6f);
    for (std::size_t k = 0; k < 68; ++k) EXPECT_NEAR(g.landmarks[k].x, s.landmarks[k].x, 1e-9);
}

TEST(Augment, LandmarksFollowImageContent) {
    // single-landmark sample with a blob drawn at the landmark
    const Point2 p0{70.3, 52.6};
    Tensor<float> hr({3, 128, 128});
    for (std::size_t y = 0; y < 128; ++y)
        for (std::size_t x = 0; x < 128; ++x) {
            const double v = std::exp(-((x - p0.x) * (x - p0.x) + (y - p0.y) * (y - p0.y)) / (2 * 3.0 * 3.0));
            for (std::size_t c = 0; c < 3; ++c) hr.at(c, y, x) = static_cast<float>(v);
        }
    const FaceSample s = make_sample("blob", hr, LandmarkSet{{p0}});
    AugmentationParams p;
    p.copies = 6;
    p.flip_probability = 0.0;
    Rng rng(12);
    for (const auto& a : augment(s, p, profile_from_name("custom:1"), rng)) {
        double sw = 0, sx = 0, sy = 0;
        for (std::size_t y = 0; y < 128; ++y)
            for (std::size_t x = 0; x < 128; ++x) {
                const double v = a.hr_image.at(1, y, x);
                sw += v, sx += v * x, sy += v * y;
            }
        EXPECT_NEAR(sx / sw, a.landmarks[0].x, 0.1) << a.id;
        EXPECT_NEAR(sy / sw, a.landmarks[0].y, 0.1) << a.id;
    }
}

TEST(Augment, RejectsInvalidParams) {
    const FaceSample s = face(6);
    Rng rng(0);
    AugmentationParams p;
    p.copies = 0;
    EXPECT_THROW(augment(s, p, profile_from_name("300w"), rng), ConfigError);
    p = AugmentationParams{};
    p.scale_min = 0;
    EXPECT_THROW(augment(s, p, profile_from_name("300w"), rng), ConfigError);
    // flips need a mirror map
    EXPECT_THROW(augment(s, AugmentationParams{}, profile_from_name("helen"), rng), ConfigError);
}

TEST(Archive, RoundTrip) {
    test::TempDir dir("archive");
    std::vector<FaceSample> samples{face(7), face(8), face(9)};
    samples[1].visible[3] = 0;
    archive::write(dir / "a.jsnr", samples, "300w", {0, 0, 1});
    ArchiveDataset ds(dir / "a.jsnr");
    ASSERT_EQ(ds.size(), 3u);
    EXPECT_EQ(ds.num_landmarks(), 68u);
    EXPECT_EQ(ds.profile(), "300w");
    EXPECT_EQ(ds.source_of(1), 0u);
    EXPECT_EQ(ds.source_of(2), 1u);
    for (std::size_t i = 0; i < 3; ++i) {
        const FaceSample r = ds.at(i);
        EXPECT_EQ(r.id, samples[i].id);
        EXPECT_EQ(r.hr_image, samples[i].hr_image);
        EXPECT_EQ(r.lr_input, samples[i].lr_input);
        EXPECT_EQ(r.target_heatmaps, samples[i].target_heatmaps);
        EXPECT_EQ(r.visible, samples[i].visible);
        for (std::size_t k = 0; k < 68; ++k) {
            EXPECT_EQ(r.landmarks[k].x, static_cast<float>(samples[i].landmarks[k].x));
            EXPECT_EQ(r.landmarks[k].y, static_cast<float>(samples[i].landmarks[k].y));
        }
        EXPECT_FLOAT_EQ(r.face_box.x1, static_cast<float>(samples[i].face_box.x1));
    }
    EXPECT_THROW(ds.at(3), ConfigError);
}

TEST(Archive, RejectsForeignAndTruncatedFiles) {
    test::TempDir dir("archive_bad");
    {
        std::ofstream(dir / "x.jsnr") << "not an archive at all";
    }
    EXPECT_THROW(ArchiveDataset(dir / "x.jsnr"), ParseError);
    EXPECT_THROW(ArchiveDataset(dir / "missing.jsnr"), Error);
    archive::write(dir / "t.jsnr", {face(10)}, "300w");
    std::filesystem::resize_file(dir / "t.jsnr", std::filesystem::file_size(dir / "t.jsnr") - 100);
    ArchiveDataset t(dir / "t.jsnr");
    EXPECT_THROW(t.at(0), ParseError);
}

TEST(Dataset, IndexedViewKeepsSources) {
    auto base = std::make_shared<InMemoryDataset>(std::vector<FaceSample>{face(11), face(12), face(13)}, "300w",
                                                  std::vector<std::size_t>{5, 5, 9});
    IndexedDataset view(base, {2, 0});
    EXPECT_EQ(view.size(), 2u);
    EXPECT_EQ(view.at(0).id, "face13");
    EXPECT_EQ(view.source_of(0), 9u);
    EXPECT_EQ(view.source_of(1), 5u);
    EXPECT_THROW(InMemoryDataset({face(1)}, "300w", {1, 2}), ConfigError);
}
