#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dmgnet/raster_ops.hpp"
#include "dmgnet/scene_data.hpp"

using namespace dmgnet;

namespace {

RasterImage random_image(int w, int h, std::uint64_t seed, double gsd = 0.5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> d(0.0f, 1.0f);
    RasterImage img(w, h, 3, gsd);
    for (auto& p : img.pixels) p = d(rng);
    return img;
}

double channel_sum(const RasterImage& img, int c) {
    return std::accumulate(img.plane(c), img.plane(c) + img.plane_size(), 0.0);
}

std::array<int, 6> histogram(const MaskStack& m) {
    std::array<int, 6> h{};
    const auto g = grades_from_mask(m);
    for (auto code : g.codes) ++h[code == kUnclassified ? 5 : code];
    return h;
}

}  // namespace

TEST_CASE("degraded extents") {
    CHECK(degraded_extent(1024, 0.5, 1.0) == 512);
    CHECK(degraded_extent(1024, 0.5, 10.0) == 51);
    CHECK(degraded_extent(1024, 0.5, 3.0) == 171);
    CHECK(degraded_extent(4, 0.5, 100.0) == 1);
}

TEST_CASE("resample at native gsd is the identity") {
    const auto img = random_image(17, 13, 1);
    CHECK(resample(img, 0.5) == img);
    CHECK(degrade_restore(img, 0.5) == img);
}

TEST_CASE("resample output dimensions and gsd") {
    const auto img = random_image(1024, 8, 2);
    const auto half = resample(img, 1.0);
    CHECK(half.width == 512);
    CHECK(half.height == 4);
    CHECK(half.gsd == 1.0);
    CHECK(resample(img, 10.0).width == 51);
    CHECK_THROWS_AS(resample(img, 0.25), std::invalid_argument);
}

TEST_CASE("2x box downsampling averages 2x2 blocks") {
    const auto img = random_image(8, 6, 3);
    const auto half = resample(img, 1.0);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 4; ++x) {
                const double mean = (img.at(c, 2 * y, 2 * x) + img.at(c, 2 * y, 2 * x + 1) + img.at(c, 2 * y + 1, 2 * x) +
                                     img.at(c, 2 * y + 1, 2 * x + 1)) /
                                    4.0;
                CHECK(std::abs(half.at(c, y, x) - mean) <= 1e-6);
            }
}

TEST_CASE("degrade_restore keeps constants and the native grid") {
    RasterImage flat(64, 48, 3, 0.5, 0.37f);
    for (double g : {1.0, 2.0, 3.0, 5.0, 10.0}) {
        const auto r = degrade_restore(flat, g);
        CHECK(r.width == 64);
        CHECK(r.height == 48);
        CHECK(r.gsd == g);
        for (float v : r.pixels) CHECK(std::abs(v - 0.37f) <= 1e-6);
    }
}

TEST_CASE("box downsampling conserves energy; degrade_restore roughly keeps the mean") {
    RasterImage impulse(64, 64, 1, 0.5, 0.0f);
    impulse.at(0, 20, 37) = 1.0f;
    for (double g : {1.0, 1.5, 2.0, 3.0, 5.0}) {
        const auto coarse = resample(impulse, g);
        const double scale = static_cast<double>(coarse.plane_size()) / impulse.plane_size();
        CHECK(std::abs(channel_sum(coarse, 0) / scale - 1.0) <= 1e-4);
    }
    const auto img = random_image(96, 96, 4);
    for (double g : {1.0, 2.0, 4.0, 10.0}) {
        const auto r = degrade_restore(img, g);
        for (int c = 0; c < 3; ++c)
            CHECK(std::abs(channel_sum(r, c) - channel_sum(img, c)) / img.plane_size() <= 1e-3);
    }
}

TEST_CASE("degrade_restore removes high frequencies") {
    RasterImage checker(32, 32, 1, 0.5);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) checker.at(0, y, x) = static_cast<float>((x + y) % 2);
    const auto r = degrade_restore(checker, 1.0);
    for (float v : r.pixels) CHECK(std::abs(v - 0.5f) <= 1e-6);
}

TEST_CASE("schedule parsing and validation") {
    const auto s = parse_schedule("0.5,1,2");
    CHECK(s.gsd == std::vector<double>{0.5, 1.0, 2.0});
    CHECK_NOTHROW(s.validate(0.5));
    CHECK_THROWS_AS(s.validate(1.0), std::invalid_argument);
    CHECK_THROWS_AS(parse_schedule("0.5,1,2,2").validate(0.5), std::invalid_argument);
    CHECK_THROWS_AS(parse_schedule("0.5,x"), std::invalid_argument);
    CHECK_THROWS_AS(parse_schedule("0.5,-1"), std::invalid_argument);
    CHECK(ResolutionSchedule{}.size() == 7);
}

namespace {

ScenePair sample_scene(std::uint64_t seed) {
    SyntheticSceneSpec spec;
    spec.seed = seed;
    spec.side = 48;
    spec.n_buildings = 4;
    return generate_synthetic_scene(spec).scene;
}

}  // namespace

TEST_CASE("augment with every flag off returns the inputs") {
    const auto s = sample_scene(1);
    const auto mask = mask_from_grades(s.labels);
    const auto out = augment(s.pre, s.post, mask, AugmentationConfig{}, 42);
    CHECK(out.pre == s.pre);
    CHECK(out.post == s.post);
    CHECK(out.mask == mask);
}

TEST_CASE("a certain horizontal flip mirrors imagery and masks") {
    const auto s = sample_scene(2);
    const auto mask = mask_from_grades(s.labels);
    AugmentationConfig cfg;
    cfg.hflip = true;
    cfg.flip_probability = 1.0;
    const auto once = augment(s.pre, s.post, mask, cfg, 0);
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x) {
            CHECK(once.pre.at(1, y, x) == s.pre.at(1, y, 47 - x));
            CHECK(once.mask.at(0, y, x) == mask.at(0, y, 47 - x));
        }
    const auto twice = augment(once.pre, once.post, once.mask, cfg, 1);
    CHECK(twice.pre == s.pre);
    CHECK(twice.post == s.post);
    CHECK(twice.mask == mask);
}

TEST_CASE("augmentation is deterministic in (seed, counter)") {
    const auto s = sample_scene(3);
    const auto mask = mask_from_grades(s.labels);
    AugmentationConfig cfg;
    cfg.noise = true;
    cfg.hue = true;
    cfg.rotate = true;
    cfg.seed = 11;
    const auto a = augment(s.pre, s.post, mask, cfg, 5);
    const auto b = augment(s.pre, s.post, mask, cfg, 5);
    CHECK(a.pre == b.pre);
    CHECK(a.mask == b.mask);
    const auto c = augment(s.pre, s.post, mask, cfg, 6);
    CHECK_FALSE(a.pre == c.pre);
    for (float v : a.post.pixels) CHECK((v >= 0.0f && v <= 1.0f));
}

TEST_CASE("photometric changes leave masks alone and draw pre and post independently") {
    const auto s = sample_scene(4);
    const auto mask = mask_from_grades(s.labels);
    AugmentationConfig cfg;
    cfg.brightness = true;
    cfg.contrast = true;
    cfg.saturation = true;
    cfg.blur = true;
    cfg.blur_probability = 1.0;
    for (std::uint64_t k = 0; k < 5; ++k) {
        const auto out = augment(s.pre, s.pre, mask, cfg, k);
        CHECK(out.mask == mask);
        CHECK_FALSE(out.pre == out.post);
    }
}

TEST_CASE("property: right-angle transforms preserve the label histogram") {
    AugmentationConfig cfg;
    cfg.hflip = cfg.vflip = cfg.rot90 = true;
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const auto s = sample_scene(10 + seed);
        const auto mask = mask_from_grades(s.labels);
        cfg.seed = seed;
        const auto out = augment(s.pre, s.post, mask, cfg, seed * 7);
        CHECK(histogram(out.mask) == histogram(mask));
        // Pixel values are permuted, not interpolated.
        auto a = s.pre.pixels, b = out.pre.pixels;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
    }
}

TEST_CASE("gaussian blur keeps constants and sigma 0 is the identity") {
    RasterImage flat(20, 10, 2, 0.5, 0.6f);
    for (float v : gaussian_blur(flat, 1.3).pixels) CHECK(std::abs(v - 0.6f) <= 1e-6);
    const auto img = random_image(9, 9, 6);
    CHECK(gaussian_blur(img, 0.0) == img);
}
