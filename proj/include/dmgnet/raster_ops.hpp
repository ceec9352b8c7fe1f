#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmgnet/types.hpp"

namespace dmgnet {

/// Ordered ground-sample distances for the perturbation harnesses; the
/// first entry is the native resolution.
struct ResolutionSchedule {
    std::vector<double> gsd{0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0};

    std::size_t size() const { return gsd.size(); }
    double native() const { return gsd.front(); }
    /// Throws std::invalid_argument unless strictly increasing and starting at native_gsd.
    void validate(double native_gsd) const;
};

/// Parses "0.5,1,2" style lists.
ResolutionSchedule parse_schedule(const std::string& csv);

/// Output side for a degraded grid: round(native * native_gsd / target_gsd), at least 1.
int degraded_extent(int native_extent, double native_gsd, double target_gsd);

/// Area-average downsampling to target_gsd. Throws std::invalid_argument if
/// target_gsd is finer than the image's gsd.
RasterImage resample(const RasterImage& image, double target_gsd);

/// Bilinear interpolation onto a width x height grid (half-pixel centers, clamped edges).
RasterImage upsample_bilinear(const RasterImage& image, int width, int height);

/// Box-downsample to target_gsd, then bilinear back onto the original grid.
/// The result keeps the native pixel grid but records target_gsd as its gsd.
RasterImage degrade_restore(const RasterImage& image, double target_gsd);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct AugmentationConfig {
    bool hflip = false;
    bool vflip = false;
    double flip_probability = 0.5;
    bool rot90 = false;  // square inputs only
    bool rotate = false;
    double max_rotation_deg = 15.0;
    bool shift = false;
    int max_shift_px = 8;
    bool crop = false;
    double min_crop_fraction = 0.8;  // crop window side as a fraction, resized back to full size

    bool hue = false;
    double max_hue_shift_deg = 10.0;
    bool noise = false;
    double noise_sigma = 0.02;
    bool blur = false;
    double max_blur_sigma = 1.5;
    double blur_probability = 0.5;
    bool saturation = false;
    Range saturation_scale{0.8, 1.2};
    bool brightness = false;
    Range brightness_scale{0.85, 1.15};
    bool contrast = false;
    Range contrast_scale{0.85, 1.15};

    std::uint64_t seed = 0;

    bool any_geometric() const { return hflip || vflip || rot90 || rotate || shift || crop; }
    bool any_photometric() const { return hue || noise || blur || saturation || brightness || contrast; }
};

struct AugmentedSample {
    RasterImage pre;
    RasterImage post;
    MaskStack mask;
};

/// Draws one augmentation from (cfg.seed, counter). The geometric transform
/// is shared by all three inputs; photometric changes touch imagery only,
/// drawn independently for pre and post. Masks use nearest-neighbor sampling.
AugmentedSample augment(const RasterImage& pre, const RasterImage& post, const MaskStack& mask,
                        const AugmentationConfig& cfg, std::uint64_t counter);

/// Separable Gaussian blur with reflected borders.
RasterImage gaussian_blur(const RasterImage& image, double sigma);

}  // namespace dmgnet
