#pragma once

#include "atomshadow/image.hpp"
#include "atomshadow/metrics.hpp"

#include <vector>

namespace atomshadow {

/// One connected blob of the Laplacian-of-Gaussian support mask.
struct Component {
    double centroid_x = 0.0;
    double centroid_y = 0.0;
    double mass = 0.0; // sum of non-negative image values over the support
    size_t pixel_count = 0;
};

/// Blob detection: |LoG response| thresholded at 3x its median absolute
/// deviation, connected components of the support, intensity-weighted
/// centroid of the original image per component. Sorted by mass, descending.
std::vector<Component> detect_components(const ImageGrid& image, double log_sigma = 3.0);

/// Centroid of the dominant component; falls back to the global
/// intensity-weighted centroid when the support mask comes up empty.
struct Center {
    double x = 0.0;
    double y = 0.0;
};
Center find_center(const ImageGrid& image, double log_sigma = 3.0);

/// Odd-width square crop about the rounded center; mirror padding where the
/// window leaves the grid.
ImageGrid crop_centered(const ImageGrid& image, Center center, int width = 101);

/// Cloud geometry on the cropped, normalized OD image. Radii come from the
/// fitted Gaussian cross-section: r_s at the 15% level, r_e at the 1% level,
/// r_m halfway between. The masks partition the crop by distance from the
/// sub-pixel center: J (r <= r_s), L (r_s < r <= r_e), K (r > r_e).
struct Segmentation {
    double center_x = 0.0;
    double center_y = 0.0;
    GaussFit1D fit; // horizontal cross-section through the center row
    double r_s = 0.0;
    double r_m = 0.0;
    double r_e = 0.0;
    std::vector<size_t> mask_J;
    std::vector<size_t> mask_L;
    std::vector<size_t> mask_K;
};

Segmentation segment(const ImageGrid& cropped);

/// 15% and 1% level factors: r = sigma * sqrt(2 ln(1/f)).
double radius_factor(double level_fraction);

} // namespace atomshadow
