#include "dmgnet/raster_ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dmgnet {

void ResolutionSchedule::validate(double native_gsd) const {
    if (gsd.empty()) throw std::invalid_argument("resolution schedule is empty");
    if (std::abs(gsd.front() - native_gsd) > 1e-9)
        throw std::invalid_argument("resolution schedule must start at the native gsd");
    for (std::size_t i = 1; i < gsd.size(); ++i)
        if (!(gsd[i] > gsd[i - 1])) throw std::invalid_argument("resolution schedule must be strictly increasing");
}

ResolutionSchedule parse_schedule(const std::string& csv) {
    ResolutionSchedule s;
    s.gsd.clear();
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size() || !(v > 0.0)) throw std::invalid_argument("bad resolution value '" + item + "'");
        s.gsd.push_back(v);
    }
    if (s.gsd.empty()) throw std::invalid_argument("empty resolution list");
    return s;
}

int degraded_extent(int native_extent, double native_gsd, double target_gsd) {
    return std::max(1, static_cast<int>(std::lround(native_extent * native_gsd / target_gsd)));
}

namespace {

struct Tap {
    int index;
    double weight;
};

// Area-average taps: output cell j covers [j*s, (j+1)*s) on the input axis.
std::vector<std::vector<Tap>> box_taps(int in_n, int out_n) {
    std::vector<std::vector<Tap>> taps(out_n);
    const double s = static_cast<double>(in_n) / out_n;
    for (int j = 0; j < out_n; ++j) {
        const double a = j * s;
        const double b = (j == out_n - 1) ? in_n : (j + 1) * s;
        const int i0 = static_cast<int>(std::floor(a));
        const int i1 = std::min(in_n, static_cast<int>(std::ceil(b)));
        double total = 0.0;
        for (int i = i0; i < i1; ++i) {
            const double w = std::min(b, i + 1.0) - std::max(a, static_cast<double>(i));
            if (w > 0.0) {
                taps[j].push_back({i, w});
                total += w;
            }
        }
        for (Tap& t : taps[j]) t.weight /= total;
    }
    return taps;
}

// Bilinear taps with half-pixel centers and edge clamping.
std::vector<std::array<Tap, 2>> linear_taps(int in_n, int out_n) {
    std::vector<std::array<Tap, 2>> taps(out_n);
    const double scale = static_cast<double>(in_n) / out_n;
    for (int x = 0; x < out_n; ++x) {
        double src = (x + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in_n - 1));
        const int i0 = static_cast<int>(std::floor(src));
        const int i1 = std::min(i0 + 1, in_n - 1);
        const double f = src - i0;
        taps[x] = {Tap{i0, 1.0 - f}, Tap{i1, f}};
    }
    return taps;
}

template <typename TapsX, typename TapsY>
RasterImage separable(const RasterImage& img, int out_w, int out_h, const TapsX& tx, const TapsY& ty) {
    RasterImage out(out_w, out_h, img.channels, img.gsd);
    std::vector<double> row_pass(static_cast<std::size_t>(img.height) * out_w);
    for (int c = 0; c < img.channels; ++c) {
        const float* src = img.plane(c);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < out_w; ++x) {
                double acc = 0.0;
                for (const Tap& t : tx[x]) acc += t.weight * src[static_cast<std::size_t>(y) * img.width + t.index];
                row_pass[static_cast<std::size_t>(y) * out_w + x] = acc;
            }
        float* dst = out.plane(c);
        for (int y = 0; y < out_h; ++y)
            for (int x = 0; x < out_w; ++x) {
                double acc = 0.0;
                for (const Tap& t : ty[y]) acc += t.weight * row_pass[static_cast<std::size_t>(t.index) * out_w + x];
                dst[static_cast<std::size_t>(y) * out_w + x] = static_cast<float>(acc);
            }
    }
    return out;
}

}  // namespace

RasterImage resample(const RasterImage& image, double target_gsd) {
    if (!(target_gsd > 0.0)) throw std::invalid_argument("target gsd must be positive");
    if (target_gsd < image.gsd - 1e-12)
        throw std::invalid_argument("resample only degrades: target gsd is finer than the native gsd");
    if (target_gsd == image.gsd) return image;
    const int w = degraded_extent(image.width, image.gsd, target_gsd);
    const int h = degraded_extent(image.height, image.gsd, target_gsd);
    RasterImage out = separable(image, w, h, box_taps(image.width, w), box_taps(image.height, h));
    out.gsd = target_gsd;
    return out;
}

RasterImage upsample_bilinear(const RasterImage& image, int width, int height) {
    return separable(image, width, height, linear_taps(image.width, width), linear_taps(image.height, height));
}

RasterImage degrade_restore(const RasterImage& image, double target_gsd) {
    RasterImage coarse = resample(image, target_gsd);
    if (target_gsd == image.gsd) return coarse;
    RasterImage out = upsample_bilinear(coarse, image.width, image.height);
    out.gsd = target_gsd;
    return out;
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

namespace {

// Maps output pixel centers (relative to the image center) to source positions.
struct Affine {
    double a = 1, b = 0, c = 0, d = 1;  // [a b; c d]
    double tx = 0, ty = 0;

    // this ∘ other: apply other first
    Affine after(const Affine& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d,
                a * o.tx + b * o.ty + tx, c * o.tx + d * o.ty + ty};
    }
};

inline int reflect(int i, int n) {
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

RasterImage warp_bilinear(const RasterImage& img, const Affine& m) {
    RasterImage out(img.width, img.height, img.channels, img.gsd);
    const double cx = img.width * 0.5, cy = img.height * 0.5;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double px = x + 0.5 - cx, py = y + 0.5 - cy;
            const double u = m.a * px + m.b * py + m.tx + cx - 0.5;
            const double v = m.c * px + m.d * py + m.ty + cy - 0.5;
            const int u0 = static_cast<int>(std::floor(u)), v0 = static_cast<int>(std::floor(v));
            const double fu = u - u0, fv = v - v0;
            const int xa = reflect(u0, img.width), xb = reflect(u0 + 1, img.width);
            const int ya = reflect(v0, img.height), yb = reflect(v0 + 1, img.height);
            for (int c = 0; c < img.channels; ++c) {
                if (fu == 0.0 && fv == 0.0) {
                    out.at(c, y, x) = img.at(c, ya, xa);
                    continue;
                }
                const double top = img.at(c, ya, xa) * (1.0 - fu) + img.at(c, ya, xb) * fu;
                const double bot = img.at(c, yb, xa) * (1.0 - fu) + img.at(c, yb, xb) * fu;
                out.at(c, y, x) = static_cast<float>(top * (1.0 - fv) + bot * fv);
            }
        }
    return out;
}

MaskStack warp_nearest(const MaskStack& mask, const Affine& m) {
    MaskStack out(mask.width, mask.height);
    const double cx = mask.width * 0.5, cy = mask.height * 0.5;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            const double px = x + 0.5 - cx, py = y + 0.5 - cy;
            const double u = m.a * px + m.b * py + m.tx + cx - 0.5;
            const double v = m.c * px + m.d * py + m.ty + cy - 0.5;
            const int su = reflect(static_cast<int>(std::floor(u + 0.5)), mask.width);
            const int sv = reflect(static_cast<int>(std::floor(v + 0.5)), mask.height);
            for (int c = 0; c < MaskStack::kChannels; ++c) out.at(c, y, x) = mask.at(c, sv, su);
        }
    return out;
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
    const float mx = std::max({r, g, b}), mn = std::min({r, g, b});
    const float delta = mx - mn;
    v = mx;
    s = mx > 0.0f ? delta / mx : 0.0f;
    if (delta <= 0.0f) {
        h = 0.0f;
        return;
    }
    if (mx == r) h = std::fmod((g - b) / delta, 6.0f);
    else if (mx == g) h = (b - r) / delta + 2.0f;
    else h = (r - g) / delta + 4.0f;
    h *= 60.0f;
    if (h < 0.0f) h += 360.0f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
    const float c = v * s;
    const float hp = std::fmod(h, 360.0f) / 60.0f;
    const float x = c * (1.0f - std::abs(std::fmod(hp, 2.0f) - 1.0f));
    float r1 = 0, g1 = 0, b1 = 0;
    if (hp < 1) { r1 = c; g1 = x; }
    else if (hp < 2) { r1 = x; g1 = c; }
    else if (hp < 3) { g1 = c; b1 = x; }
    else if (hp < 4) { g1 = x; b1 = c; }
    else if (hp < 5) { r1 = x; b1 = c; }
    else { r1 = c; b1 = x; }
    const float m = v - c;
    r = r1 + m;
    g = g1 + m;
    b = b1 + m;
}

double draw(std::mt19937_64& rng, Range r) {
    if (!(r.hi > r.lo)) return r.lo;
    return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

void photometric(RasterImage& img, const AugmentationConfig& cfg, std::mt19937_64& rng) {
    const std::size_t n = img.plane_size();
    if (img.channels == 3 && (cfg.hue || cfg.saturation)) {
        const double hue = cfg.hue ? draw(rng, {-std::abs(cfg.max_hue_shift_deg), std::abs(cfg.max_hue_shift_deg)}) : 0.0;
        const double sat = cfg.saturation ? draw(rng, cfg.saturation_scale) : 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            float h, s, v;
            rgb_to_hsv(img.pixels[i], img.pixels[n + i], img.pixels[2 * n + i], h, s, v);
            h = std::fmod(h + static_cast<float>(hue) + 360.0f, 360.0f);
            s = std::clamp(s * static_cast<float>(sat), 0.0f, 1.0f);
            hsv_to_rgb(h, s, v, img.pixels[i], img.pixels[n + i], img.pixels[2 * n + i]);
        }
    }
    if (cfg.brightness) {
        const auto f = static_cast<float>(draw(rng, cfg.brightness_scale));
        for (float& p : img.pixels) p *= f;
    }
    if (cfg.contrast) {
        const auto f = static_cast<float>(draw(rng, cfg.contrast_scale));
        for (int c = 0; c < img.channels; ++c) {
            float* p = img.plane(c);
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += p[i];
            mean /= static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<float>((p[i] - mean) * f + mean);
        }
    }
    if (cfg.blur) {
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        const double sigma = draw(rng, {0.3, std::max(0.3, cfg.max_blur_sigma)});
        if (coin(rng) < cfg.blur_probability) img = gaussian_blur(img, sigma);
    }
    if (cfg.noise && cfg.noise_sigma > 0.0) {
        std::normal_distribution<float> noise(0.0f, static_cast<float>(cfg.noise_sigma));
        for (float& p : img.pixels) p += noise(rng);
    }
    for (float& p : img.pixels) p = std::clamp(p, 0.0f, 1.0f);
}

}  // namespace

RasterImage gaussian_blur(const RasterImage& image, double sigma) {
    if (!(sigma > 0.0)) return image;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) total += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& v : k) v /= total;
    RasterImage out = image;
    const int w = image.width, h = image.height;
    std::vector<double> padded(static_cast<std::size_t>(w) + 2 * radius);
    std::vector<double> mid(static_cast<std::size_t>(w) * h), acc(w);
    for (int c = 0; c < image.channels; ++c) {
        const float* src = image.plane(c);
        for (int y = 0; y < h; ++y) {
            for (int x = -radius; x < w + radius; ++x) padded[x + radius] = src[y * w + reflect(x, w)];
            double* row = &mid[static_cast<std::size_t>(y) * w];
            for (int x = 0; x < w; ++x) {
                double a = 0.0;
                for (int i = 0; i <= 2 * radius; ++i) a += k[i] * padded[x + i];
                row[x] = static_cast<float>(a);
            }
        }
        float* dst = out.plane(c);
        for (int y = 0; y < h; ++y) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int i = -radius; i <= radius; ++i) {
                const double* row = &mid[static_cast<std::size_t>(reflect(y + i, h)) * w];
                const double kv = k[i + radius];
                for (int x = 0; x < w; ++x) acc[x] += kv * row[x];
            }
            for (int x = 0; x < w; ++x) dst[y * w + x] = static_cast<float>(acc[x]);
        }
    }
    return out;
}

AugmentedSample augment(const RasterImage& pre, const RasterImage& post, const MaskStack& mask,
                        const AugmentationConfig& cfg, std::uint64_t counter) {
    AugmentedSample out{pre, post, mask};
    if (!cfg.any_geometric() && !cfg.any_photometric()) return out;

    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    if (cfg.any_geometric()) {
        Affine m;
        bool touched = false;
        if (cfg.crop) {
            const double f = draw(rng, {std::clamp(cfg.min_crop_fraction, 0.05, 1.0), 1.0});
            const double slack_x = (1.0 - f) * pre.width * 0.5, slack_y = (1.0 - f) * pre.height * 0.5;
            const double ox = draw(rng, {-slack_x, slack_x}), oy = draw(rng, {-slack_y, slack_y});
            m = Affine{f, 0, 0, f, ox, oy}.after(m);
            touched = true;
        }
        if (cfg.rotate) {
            const double deg = draw(rng, {-std::abs(cfg.max_rotation_deg), std::abs(cfg.max_rotation_deg)});
            const double t = deg * std::numbers::pi / 180.0;
            m = Affine{std::cos(t), -std::sin(t), std::sin(t), std::cos(t), 0, 0}.after(m);
            touched = true;
        }
        if (cfg.rot90 && pre.width == pre.height) {
            const int k = std::uniform_int_distribution<int>(0, 3)(rng);
            static constexpr std::array<std::array<double, 4>, 4> kRot{
                {{1, 0, 0, 1}, {0, -1, 1, 0}, {-1, 0, 0, -1}, {0, 1, -1, 0}}};
            const auto& r = kRot[k];
            m = Affine{r[0], r[1], r[2], r[3], 0, 0}.after(m);
            touched = touched || k != 0;
        }
        if (cfg.hflip && coin(rng) < cfg.flip_probability) {
            m = Affine{-1, 0, 0, 1, 0, 0}.after(m);
            touched = true;
        }
        if (cfg.vflip && coin(rng) < cfg.flip_probability) {
            m = Affine{1, 0, 0, -1, 0, 0}.after(m);
            touched = true;
        }
        if (cfg.shift && cfg.max_shift_px > 0) {
            std::uniform_int_distribution<int> s(-cfg.max_shift_px, cfg.max_shift_px);
            m.tx += s(rng);
            m.ty += s(rng);
            touched = true;
        }
        if (touched) {
            out.pre = warp_bilinear(pre, m);
            out.post = warp_bilinear(post, m);
            out.mask = warp_nearest(mask, m);
        }
    }
    if (cfg.any_photometric()) {
        photometric(out.pre, cfg, rng);
        photometric(out.post, cfg, rng);
    }
    return out;
}

}  // namespace dmgnet
