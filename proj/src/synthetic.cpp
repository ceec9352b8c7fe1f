#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "dmgnet/scene_data.hpp"

namespace dmgnet {

namespace {

using Rgb = std::array<float, 3>;

struct Palette {
    Rgb ground;
    Rgb ground_alt;
    Rgb road;
    std::vector<Rgb> roofs;
    Rgb debris;
    Rgb rubble;
    Rgb water;
};

const Palette& palette(bool alternate) {
    static const Palette kDefault{
        {0.24f, 0.40f, 0.20f},
        {0.36f, 0.44f, 0.24f},
        {0.30f, 0.30f, 0.32f},
        {{0.78f, 0.36f, 0.30f}, {0.74f, 0.74f, 0.76f}, {0.62f, 0.50f, 0.40f}, {0.88f, 0.82f, 0.70f}},
        {0.22f, 0.18f, 0.16f},
        {0.52f, 0.46f, 0.40f},
        {0.28f, 0.25f, 0.18f},
    };
    static const Palette kAlternate{
        {0.46f, 0.43f, 0.38f},
        {0.52f, 0.50f, 0.44f},
        {0.26f, 0.26f, 0.28f},
        {{0.34f, 0.36f, 0.40f}, {0.66f, 0.30f, 0.22f}, {0.58f, 0.58f, 0.54f}},
        {0.30f, 0.22f, 0.18f},
        {0.60f, 0.55f, 0.50f},
        {0.34f, 0.30f, 0.22f},
    };
    return alternate ? kAlternate : kDefault;
}

struct Rect {
    int x0, y0, x1, y1;  // half-open
    bool overlaps(const Rect& o, int margin) const {
        return x0 < o.x1 + margin && o.x0 < x1 + margin && y0 < o.y1 + margin && o.y0 < y1 + margin;
    }
};

inline float quantize(float v) { return std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f; }

void put(RasterImage& img, int y, int x, const Rgb& c) {
    for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = c[ch];
}

Rgb mix(const Rgb& a, const Rgb& b, float t) {
    return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

Rgb shade(const Rgb& c, float factor, float noise) {
    return {c[0] * factor + noise, c[1] * factor + noise, c[2] * factor + noise};
}

DamageGrade draw_grade(std::mt19937_64& rng, const std::array<double, kNumGrades>& profile) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = u(rng);
    double acc = 0.0;
    for (int g = 0; g < kNumGrades; ++g) {
        acc += profile[g];
        if (r < acc && profile[g] > 0.0) return static_cast<DamageGrade>(g + 1);
    }
    for (int g = kNumGrades - 1; g >= 0; --g)
        if (profile[g] > 0.0) return static_cast<DamageGrade>(g + 1);
    return DamageGrade::no_damage;
}

void render_ground(RasterImage& img, const Palette& pal, std::mt19937_64& rng) {
    std::uniform_real_distribution<float> phase(0.0f, 2.0f * std::numbers::pi_v<float>);
    std::uniform_real_distribution<float> freq(0.02f, 0.09f);
    std::normal_distribution<float> noise(0.0f, 0.025f);
    const float fx1 = freq(rng), fy1 = freq(rng), p1 = phase(rng);
    const float fx2 = freq(rng), fy2 = freq(rng), p2 = phase(rng);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const float low = 0.5f + 0.25f * std::sin(fx1 * x + fy1 * y + p1) + 0.25f * std::sin(fx2 * x - fy2 * y + p2);
            const Rgb base = mix(pal.ground, pal.ground_alt, low);
            put(img, y, x, shade(base, 1.0f, noise(rng)));
        }
    }
}

Rect render_road(RasterImage& img, const Palette& pal, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> coin(0, 1);
    const int side = img.width;
    const int thickness = std::max(3, side / 24);
    std::uniform_int_distribution<int> pos(thickness, side - 2 * thickness);
    const int at = pos(rng);
    std::normal_distribution<float> noise(0.0f, 0.015f);
    Rect r = coin(rng) ? Rect{0, at, side, at + thickness} : Rect{at, 0, at + thickness, side};
    for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x) put(img, y, x, shade(pal.road, 1.0f, noise(rng)));
    return r;
}

void render_roof(RasterImage& img, const Rect& r, const Rgb& roof, bool ridge_vertical, std::mt19937_64& rng) {
    std::normal_distribution<float> noise(0.0f, 0.015f);
    for (int y = r.y0; y < r.y1; ++y) {
        for (int x = r.x0; x < r.x1; ++x) {
            const bool lit = ridge_vertical ? (x - r.x0) * 2 < (r.x1 - r.x0) : (y - r.y0) * 2 < (r.y1 - r.y0);
            put(img, y, x, shade(roof, lit ? 1.0f : 0.88f, noise(rng)));
        }
    }
}

void render_shadow(RasterImage& img, const Rect& r) {
    const int w = img.width, h = img.height;
    for (int y = r.y0 + 1; y <= r.y1 + 1; ++y)
        for (int x = r.x1; x < r.x1 + 2; ++x)
            if (x < w && y < h)
                for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) *= 0.6f;
    for (int y = r.y1; y < r.y1 + 2; ++y)
        for (int x = r.x0 + 1; x < r.x1; ++x)
            if (x < w && y < h)
                for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) *= 0.6f;
}

// Small dark debris blobs over roughly 12% of the roof.
void render_speckle(RasterImage& img, const Rect& r, const Rgb& debris, std::mt19937_64& rng) {
    const int area = (r.x1 - r.x0) * (r.y1 - r.y0);
    const int blobs = std::max(2, area / 40);
    std::uniform_int_distribution<int> px(r.x0, r.x1 - 1), py(r.y0, r.y1 - 1);
    std::normal_distribution<float> noise(0.0f, 0.03f);
    for (int b = 0; b < blobs; ++b) {
        const int cx = px(rng), cy = py(rng);
        for (int y = cy - 1; y <= cy + 1; ++y)
            for (int x = cx - 1; x <= cx + 1; ++x)
                if (x >= r.x0 && x < r.x1 && y >= r.y0 && y < r.y1 && std::abs(x - cx) + std::abs(y - cy) <= 1)
                    put(img, y, x, shade(debris, 1.0f, noise(rng)));
    }
}

// A large contiguous part of the roof turned into mixed debris.
void render_disruption(RasterImage& img, const Rect& r, const Rgb& roof, const Rgb& debris, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> coin(0, 3);
    const int w = r.x1 - r.x0, h = r.y1 - r.y0;
    Rect d = r;
    switch (coin(rng)) {
        case 0: d.x1 = r.x0 + (w * 3 + 3) / 5; break;
        case 1: d.x0 = r.x1 - (w * 3 + 3) / 5; break;
        case 2: d.y1 = r.y0 + (h * 3 + 3) / 5; break;
        default: d.y0 = r.y1 - (h * 3 + 3) / 5; break;
    }
    std::uniform_real_distribution<float> t(0.0f, 1.0f);
    std::normal_distribution<float> noise(0.0f, 0.05f);
    for (int y = d.y0; y < d.y1; ++y)
        for (int x = d.x0; x < d.x1; ++x) put(img, y, x, shade(mix(debris, roof, 0.6f * t(rng)), 1.0f, noise(rng)));
}

void render_rubble(RasterImage& img, const Rect& r, const Rgb& rubble, std::mt19937_64& rng) {
    std::normal_distribution<float> noise(0.0f, 0.10f);
    std::uniform_real_distribution<float> f(0.7f, 1.15f);
    for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x) put(img, y, x, shade(rubble, f(rng), noise(rng)));
}

// Flood signature: darkened water ring around an intact roof.
void render_flood_ring(RasterImage& img, const Rect& r, int grade, const Rgb& water,
                       const std::vector<bool>& roof_px, std::mt19937_64& rng) {
    static constexpr std::array<int, 5> kRing{0, 0, 2, 4, 7};
    const int ring = kRing[grade];
    if (ring == 0) return;
    std::normal_distribution<float> noise(0.0f, 0.02f);
    for (int y = r.y0 - ring; y < r.y1 + ring; ++y) {
        for (int x = r.x0 - ring; x < r.x1 + ring; ++x) {
            if (x < 0 || y < 0 || x >= img.width || y >= img.height) continue;
            if (roof_px[static_cast<std::size_t>(y) * img.width + x]) continue;
            const Rgb cur{img.at(0, y, x), img.at(1, y, x), img.at(2, y, x)};
            put(img, y, x, shade(mix(cur, water, 0.75f), 1.0f, noise(rng)));
        }
    }
}

}  // namespace

SyntheticScene generate_synthetic_scene(const SyntheticSceneSpec& spec) {
    if (spec.side < 32) throw std::invalid_argument("synthetic scene side must be >= 32");
    if (spec.n_buildings < 0) throw std::invalid_argument("n_buildings must be >= 0");
    if (spec.min_building < 2 || spec.max_building < spec.min_building)
        throw std::invalid_argument("invalid building size range");
    double total = 0.0;
    for (double p : spec.damage_profile) {
        if (p < 0.0) throw std::invalid_argument("damage probabilities must be non-negative");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("damage probabilities must sum to 1");

    const Palette& pal = palette(spec.alternate_domain);
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(spec.side), static_cast<std::uint32_t>(spec.n_buildings)};
    std::mt19937_64 rng(seq);

    const int side = spec.side;
    SyntheticScene out;
    ScenePair& scene = out.scene;
    scene.event_id = spec.event_id;
    scene.hazard = spec.hazard;
    scene.split = spec.split;
    scene.scene_id = spec.event_id + "-" + std::to_string(spec.seed);
    scene.pre = RasterImage(side, side, 3, spec.gsd);

    render_ground(scene.pre, pal, rng);
    std::vector<Rect> occupied;
    std::uniform_int_distribution<int> coin(0, 1);
    if (coin(rng)) occupied.push_back(render_road(scene.pre, pal, rng));

    const int max_size = std::min(spec.max_building, side - 4);
    const int min_size = std::min(spec.min_building, max_size);
    std::uniform_int_distribution<int> size_dist(min_size, max_size);
    struct Building {
        Rect rect;
        DamageGrade grade;
        Rgb roof;
        bool ridge_vertical;
    };
    std::vector<Building> buildings;
    constexpr int kRetries = 200;
    for (int b = 0; b < spec.n_buildings; ++b) {
        for (int attempt = 0; attempt < kRetries; ++attempt) {
            const int w = size_dist(rng), h = size_dist(rng);
            std::uniform_int_distribution<int> px(1, side - w - 3), py(1, side - h - 3);
            const Rect r{px(rng), py(rng), 0, 0};
            const Rect rect{r.x0, r.y0, r.x0 + w, r.y0 + h};
            const bool clash = std::any_of(occupied.begin(), occupied.end(),
                                           [&](const Rect& o) { return rect.overlaps(o, 3); });
            if (clash) continue;
            occupied.push_back(rect);
            std::uniform_int_distribution<std::size_t> roof_pick(0, pal.roofs.size() - 1);
            const Rgb roof = pal.roofs[roof_pick(rng)];
            buildings.push_back({rect, draw_grade(rng, spec.damage_profile), roof, coin(rng) == 1});
            break;
        }
    }
    out.placed = static_cast<int>(buildings.size());

    for (const Building& b : buildings) {
        render_shadow(scene.pre, b.rect);
        render_roof(scene.pre, b.rect, b.roof, b.ridge_vertical, rng);
    }
    for (float& v : scene.pre.pixels) v = quantize(v);

    // Post image: same ground with a slight acquisition change.
    scene.post = scene.pre;
    std::vector<bool> roof_px(scene.post.plane_size(), false);
    for (const Building& b : buildings)
        for (int y = b.rect.y0; y < b.rect.y1; ++y)
            for (int x = b.rect.x0; x < b.rect.x1; ++x) roof_px[static_cast<std::size_t>(y) * side + x] = true;
    {
        std::normal_distribution<float> noise(0.0f, 0.015f);
        std::uniform_real_distribution<float> gain(0.96f, 1.04f);
        const float g = gain(rng);
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) {
                if (roof_px[static_cast<std::size_t>(y) * side + x]) continue;
                for (int ch = 0; ch < 3; ++ch) scene.post.at(ch, y, x) = scene.post.at(ch, y, x) * g + noise(rng);
            }
    }
    const bool flood = spec.hazard == HazardType::flood;
    for (const Building& b : buildings) {
        const int grade = static_cast<int>(b.grade);
        if (flood) {
            render_flood_ring(scene.post, b.rect, grade, pal.water, roof_px, rng);
            continue;
        }
        switch (b.grade) {
            case DamageGrade::minor: render_speckle(scene.post, b.rect, pal.debris, rng); break;
            case DamageGrade::major:
                render_disruption(scene.post, b.rect, b.roof, pal.debris, rng);
                render_speckle(scene.post, b.rect, pal.debris, rng);
                break;
            case DamageGrade::destroyed: render_rubble(scene.post, b.rect, pal.rubble, rng); break;
            default: break;
        }
    }
    for (float& v : scene.post.pixels) v = quantize(v);

    for (const Building& b : buildings) {
        const auto& r = b.rect;
        scene.annotations.push_back(
            {{{double(r.x0), double(r.y0)}, {double(r.x1), double(r.y0)}, {double(r.x1), double(r.y1)}, {double(r.x0), double(r.y1)}},
             b.grade});
    }
    scene.labels = rasterize_annotations(scene).grades;
    return out;
}

}  // namespace dmgnet
