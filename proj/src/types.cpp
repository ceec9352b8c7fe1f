#include "dmgnet/types.hpp"

#include <cmath>
#include <string>

namespace dmgnet {

namespace {

constexpr std::array<std::string_view, 6> kHazardNames{"flood",   "fire",    "earthquake",
                                                       "tsunami", "volcano", "wind"};
constexpr std::array<std::string_view, 3> kSplitNames{"train", "test", "holdout"};

}  // namespace

std::string_view to_string(HazardType h) { return kHazardNames[static_cast<std::size_t>(h)]; }
std::string_view to_string(Split s) { return kSplitNames[static_cast<std::size_t>(s)]; }

HazardType parse_hazard(std::string_view s) {
    for (std::size_t i = 0; i < kHazardNames.size(); ++i)
        if (kHazardNames[i] == s) return static_cast<HazardType>(i);
    throw std::invalid_argument("unknown hazard type '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
    for (std::size_t i = 0; i < kSplitNames.size(); ++i)
        if (kSplitNames[i] == s) return static_cast<Split>(i);
    throw std::invalid_argument("unknown split '" + std::string(s) + "'");
}

RasterImage::RasterImage(int w, int h, int c, double gsd_m, float fill)
    : width(w), height(h), channels(c), gsd(gsd_m),
      pixels(static_cast<std::size_t>(w) * h * c, fill) {}

void RasterImage::validate() const {
    if (width < 1 || height < 1 || channels < 1)
        throw std::invalid_argument("raster image must have positive dimensions");
    if (!(gsd > 0.0) || !std::isfinite(gsd)) throw std::invalid_argument("raster image gsd must be > 0");
    if (pixels.size() != plane_size() * channels)
        throw std::invalid_argument("raster image pixel buffer does not match its dimensions");
    for (float v : pixels)
        if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("raster image pixel outside [0,1]");
}

void ScenePair::validate() const {
    pre.validate();
    post.validate();
    if (pre.width != post.width || pre.height != post.height || pre.gsd != post.gsd)
        throw std::invalid_argument("pre and post images of scene '" + scene_id +
                                    "' are not co-registered");
    if (labels.width != pre.width || labels.height != pre.height)
        throw std::invalid_argument("label grid of scene '" + scene_id + "' does not match imagery");
}

MaskStack mask_from_grades(const GradeMap& labels) {
    MaskStack m(labels.width, labels.height);
    const std::size_t n = m.plane_size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t code = labels.codes[i];
        if (code == 0) continue;
        m.data[i] = 1.0f;
        if (is_building_code(code)) m.data[code * n + i] = 1.0f;
    }
    return m;
}

GradeMap grades_from_mask(const MaskStack& mask) {
    GradeMap g(mask.width, mask.height);
    const std::size_t n = mask.plane_size();
    for (std::size_t i = 0; i < n; ++i) {
        if (mask.data[i] < 0.5f) continue;
        g.codes[i] = kUnclassified;
        for (int c = 1; c <= kNumGrades; ++c)
            if (mask.data[c * n + i] >= 0.5f) g.codes[i] = static_cast<std::uint8_t>(c);
    }
    return g;
}

std::array<bool, kNumGrades + 1> grades_present(const GradeMap& labels) {
    std::array<bool, kNumGrades + 1> present{};
    for (std::uint8_t code : labels.codes)
        if (is_building_code(code)) present[code] = true;
    return present;
}

}  // namespace dmgnet
