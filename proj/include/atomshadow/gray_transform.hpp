#pragma once

#include "atomshadow/image.hpp"
#include "atomshadow/segmentation.hpp"

namespace atomshadow {

/// Piecewise gray map on [0,1]: gamma suppression below g_l, circular-arc
/// blend on [g_l, g_h) tangent to the identity at g_h, identity above g_h.
struct GrayParams {
    double g_l = 0.0;   // low knee
    double g_h = 0.0;   // high knee
    double y1 = 0.0;    // transform value at g_l (= kappa * g_l)
    double a = 0.0;     // arc center, gray axis
    double b = 0.0;     // arc center, output axis
    double r = 0.0;     // arc radius
    double gamma = 1.0; // suppression exponent
    double m = 1.0;     // gamma-branch scale
    double kappa = 0.5;
};

struct KneeDetection {
    double g_l = 0.0;
    double g_h = 0.0;
    RegionStats p_minima; // stats of the 10 smallest cloud-region values
    RegionStats q_maxima; // stats of the 10 largest background values
    bool fallback = false; // ordering failed, g_l forced to g_h / 2
};

/// Knees from region statistics of the filtered image: g_h from the ten
/// minimum values in the cloud region (mask_J), g_l from the ten maximum
/// values in the background (mask_K), separated by three standard deviations.
KneeDetection detect_knees(const ImageGrid& filtered, const Segmentation& seg);

/// Closed-form arc/gamma parameters for the given knees. Throws
/// ParameterError when the geometry cannot produce a monotone transform.
GrayParams solve_gray_params(double g_l, double g_h, double kappa = 0.5);

struct GrayResult {
    ImageGrid image;
    size_t out_of_range_pixels = 0; // inputs outside [0,1] passed through
};

/// Apply the point transform to a [0,1] image.
GrayResult apply_gray_transform(const ImageGrid& image, const GrayParams& params);

/// The scalar map itself (exposed for tests and plotting).
double gray_value(double g, const GrayParams& params);

} // namespace atomshadow
