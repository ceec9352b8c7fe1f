#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmgnet/types.hpp"

namespace dmgnet {

// ---------------------------------------------------------------------------
// Rasterization
// ---------------------------------------------------------------------------

struct RasterizeResult {
    MaskStack mask;
    GradeMap grades;
    int skipped = 0;  // degenerate polygons (zero area after clipping)
};

/// Even-odd test of a single point.
bool point_in_polygon(const std::vector<Point>& polygon, double x, double y);

/// Fills every polygon by pixel-center sampling (even-odd rule), in list
/// order; later annotations overwrite earlier ones.
RasterizeResult rasterize_annotations(const std::vector<BuildingAnnotation>& annotations, int width,
                                      int height);
RasterizeResult rasterize_annotations(const ScenePair& scene);

// ---------------------------------------------------------------------------
// Synthetic scenes
// ---------------------------------------------------------------------------

struct SyntheticSceneSpec {
    std::uint64_t seed = 0;
    int side = 128;
    int n_buildings = 8;
    std::array<double, kNumGrades> damage_profile{0.4, 0.2, 0.2, 0.2};
    HazardType hazard = HazardType::wind;
    double gsd = 0.5;
    int min_building = 10;
    int max_building = 24;
    /// Selects an alternative palette and texture, used to stand in for
    /// out-of-distribution imagery.
    bool alternate_domain = false;
    std::string event_id = "synthetic";
    Split split = Split::train;
};

struct SyntheticScene {
    ScenePair scene;
    int placed = 0;  // may be below n_buildings if placement ran out of retries
};

SyntheticScene generate_synthetic_scene(const SyntheticSceneSpec& spec);

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct SceneRecord {
    std::string event_id;
    HazardType hazard = HazardType::wind;
    Split split = Split::train;
    std::string pre_path;
    std::string post_path;
    std::string mask_path;
    double gsd = 0.5;

    bool operator==(const SceneRecord&) const = default;
};

struct DatasetManifest {
    std::vector<SceneRecord> scenes;
    /// Directory that relative paths are resolved against.
    std::filesystem::path base_dir;

    std::vector<std::string> events() const;  // sorted, unique
    std::vector<std::size_t> indices_for_event(const std::string& event_id) const;
    std::vector<std::size_t> indices_for_hazard(HazardType hazard) const;

    DatasetManifest filter_events(const std::vector<std::string>& event_ids) const;
    DatasetManifest filter_hazard(HazardType hazard) const;
    DatasetManifest filter_split(Split split) const;

    std::filesystem::path resolve(const std::string& path) const;

    bool operator==(const DatasetManifest& other) const { return scenes == other.scenes; }
};

enum class ManifestErrorKind { missing_file, schema_violation, dangling_path, io_failure };

class ManifestError : public std::runtime_error {
public:
    ManifestError(ManifestErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ManifestErrorKind kind() const { return kind_; }

private:
    ManifestErrorKind kind_;
};

/// Parses the manifest; every path must resolve relative to the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Reads imagery and label mask of one record.
ScenePair load_scene(const DatasetManifest& manifest, std::size_t index);
std::vector<ScenePair> load_scenes(const DatasetManifest& manifest);

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

void write_png(const RasterImage& image, const std::filesystem::path& path);
void write_png(const GradeMap& labels, const std::filesystem::path& path);
RasterImage read_png_image(const std::filesystem::path& path, double gsd);
GradeMap read_png_labels(const std::filesystem::path& path);

}  // namespace dmgnet
