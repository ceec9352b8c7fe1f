#pragma once

// Core domain types shared by every module: imagery, label grids,
// annotations, scene pairs and the 5-channel mask volume.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dmgnet {

/// Ordinal damage code. 0 is background, 1..4 are the building grades
/// (no damage, minor, major, destroyed). 255 marks unclassified building
/// pixels in ground truth; it is never predicted and never scored.
enum class DamageGrade : std::uint8_t {
    background = 0,
    no_damage = 1,
    minor = 2,
    major = 3,
    destroyed = 4,
    unclassified = 255,
};

inline constexpr int kNumGrades = 4;
inline constexpr std::uint8_t kUnclassified = 255;

inline constexpr bool is_building_code(std::uint8_t code) {
    return code >= 1 && code <= kNumGrades;
}

enum class HazardType { flood, fire, earthquake, tsunami, volcano, wind };
enum class Split { train, test, holdout };

std::string_view to_string(HazardType h);
std::string_view to_string(Split s);
HazardType parse_hazard(std::string_view s);
Split parse_split(std::string_view s);

/// Multi-channel planar (CHW) image with values in [0,1] and a ground
/// sample distance in meters per pixel.
struct RasterImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    double gsd = 0.5;
    std::vector<float> pixels;

    RasterImage() = default;
    RasterImage(int w, int h, int c, double gsd_m, float fill = 0.0f);

    std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
    float& at(int c, int y, int x) { return pixels[(c * plane_size()) + static_cast<std::size_t>(y) * width + x]; }
    float at(int c, int y, int x) const {
        return pixels[(c * plane_size()) + static_cast<std::size_t>(y) * width + x];
    }
    float* plane(int c) { return pixels.data() + c * plane_size(); }
    const float* plane(int c) const { return pixels.data() + c * plane_size(); }

    /// Throws std::invalid_argument when dimensions, gsd or pixel values are out of range.
    void validate() const;

    bool operator==(const RasterImage&) const = default;
};

/// Single-channel 8-bit label grid holding codes 0..4 and 255.
struct GradeMap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> codes;

    GradeMap() = default;
    GradeMap(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), codes(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t& at(int y, int x) { return codes[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return codes[static_cast<std::size_t>(y) * width + x]; }

    bool operator==(const GradeMap&) const = default;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

struct BuildingAnnotation {
    std::vector<Point> polygon;  // pixel coordinates on the native grid
    DamageGrade grade = DamageGrade::no_damage;
    bool operator==(const BuildingAnnotation&) const = default;
};

/// Per-pixel target or prediction volume: channel 0 is localization,
/// channels 1..4 are the damage grades. Planar layout.
struct MaskStack {
    static constexpr int kChannels = 1 + kNumGrades;

    int width = 0;
    int height = 0;
    std::vector<float> data;

    MaskStack() = default;
    MaskStack(int w, int h, float fill = 0.0f)
        : width(w), height(h), data(static_cast<std::size_t>(kChannels) * w * h, fill) {}

    std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
    float& at(int c, int y, int x) { return data[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }
    float at(int c, int y, int x) const { return data[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }
    float* plane(int c) { return data.data() + c * plane_size(); }
    const float* plane(int c) const { return data.data() + c * plane_size(); }

    bool operator==(const MaskStack&) const = default;
};

/// Co-registered pre/post imagery with labels and event metadata.
/// `labels` is the rasterized ground truth; `annotations` may be empty
/// when a scene was loaded from label masks on disk.
struct ScenePair {
    std::string scene_id;
    RasterImage pre;
    RasterImage post;
    std::vector<BuildingAnnotation> annotations;
    GradeMap labels;
    std::string event_id;
    HazardType hazard = HazardType::wind;
    Split split = Split::train;

    /// Throws std::invalid_argument if pre/post are not co-registered.
    void validate() const;

    bool operator==(const ScenePair&) const = default;
};

/// Hard 5-channel target from a label grid. Unclassified pixels count as
/// buildings for localization and carry no damage channel.
MaskStack mask_from_grades(const GradeMap& labels);

/// Label grid from a hard stack: background where loc < 0.5, otherwise the
/// grade whose channel is set, or unclassified when none is.
GradeMap grades_from_mask(const MaskStack& mask);

/// Which building grades occur in a label grid (index 1..4 used).
std::array<bool, kNumGrades + 1> grades_present(const GradeMap& labels);

}  // namespace dmgnet
