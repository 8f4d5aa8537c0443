#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace atomshadow {

/// Row-major 2-D grid of double pixels. The universal carrier for raw
/// frames, optical-density maps and sigma fields. pixel_pitch_um is the
/// physical pixel size; when absent, metrics that need physical units
/// are unavailable.
struct ImageGrid {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;
    std::optional<double> pixel_pitch_um;

    ImageGrid() = default;
    ImageGrid(int w, int h, double fill = 0.0,
              std::optional<double> pitch_um = std::nullopt);

    double& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }

    size_t size() const { return pixels.size(); }
    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height;
    }
    bool congruent_with(const ImageGrid& other) const {
        return width == other.width && height == other.height;
    }
};

/// Throws ValidationError if the grid is malformed or holds non-finite pixels.
void require_valid(const ImageGrid& image, const char* what);

double min_pixel(const ImageGrid& image);
double max_pixel(const ImageGrid& image);

/// The three absorption-imaging frames: atoms (cloud shadow), light
/// (probe only), dark (no probe).
struct RawTriplet {
    ImageGrid atoms;
    ImageGrid light;
    ImageGrid dark;
};

void require_congruent(const RawTriplet& triplet);

struct RegionStats {
    double mean = 0.0;
    double stddev = 0.0; // population convention (divide by count)
    size_t count = 0;
};

struct OdOptions {
    // Transmission ratios are clamped into [clamp_floor, 1/clamp_floor]
    // so the log stays finite on dead or saturated pixels.
    double clamp_floor = 1e-6;
};

struct OdResult {
    ImageGrid od;
    size_t clamped_pixels = 0; // ratio hit the clamp bounds
    size_t unlit_pixels = 0;   // light - dark <= 0, treated as zero OD
};

/// Optical density A = -ln((atoms - dark) / (light - dark)), per pixel.
OdResult compute_optical_density(const RawTriplet& triplet, const OdOptions& opts = {});

/// Mean and population standard deviation over the masked pixels
/// (mask entries are row-major indices). Fixed-order summation, so the
/// result is independent of any parallel schedule.
RegionStats region_stats(const ImageGrid& image, std::span<const size_t> mask);

/// Stats over every pixel.
RegionStats region_stats(const ImageGrid& image);

struct Normalized {
    ImageGrid image;   // affinely mapped so min -> 0, max -> 1
    double scale = 1.0;  // original = image * scale + offset
    double offset = 0.0;
};

/// Affine map of the image onto [0,1]. Throws on constant input.
Normalized normalize_unit(const ImageGrid& image);

/// Inverse of normalize_unit's map, pixel-wise.
ImageGrid denormalize(const ImageGrid& image, double scale, double offset);

} // namespace atomshadow
