#pragma once

#include "atomshadow/image.hpp"
#include "atomshadow/mdl.hpp"
#include "atomshadow/segmentation.hpp"

namespace atomshadow {

/// Radial width profile for r >= r_s: a power rise from sigma_s to sigma_m
/// on (r_s, r_m], a circular arc from sigma_m to sigma_e on (r_m, r_e] that
/// lands with zero slope, and constant sigma_e beyond r_e. When the arc
/// geometry degenerates (|sigma_e - sigma_m| > r_e - r_m) the landing piece
/// becomes the osculating parabola with the same boundary conditions.
struct SigmaProfile {
    double r_s = 0.0, r_m = 0.0, r_e = 0.0;
    double sigma_s = 0.0, sigma_m = 0.0, sigma_e = 0.0;
    // power branch sigma_s + a (r - r_s)^p
    double power_a = 0.0;
    double power_p = 1.0;
    // arc branch yc + sign * sqrt(R^2 - (r - r_e)^2)
    double arc_radius = 0.0;
    double arc_yc = 0.0;
    double arc_sign = 1.0;
    bool parabolic_landing = false;
    bool flat = false; // sigma_s == sigma_e: whole profile constant

    double value(double r) const;
};

SigmaProfile make_sigma_profile(double r_s, double r_m, double r_e, double sigma_s,
                                double sigma_e);

struct CalibrationThresholds {
    double mk_max = 0.1;  // max background mean after filtering
    double sk_max = 0.05; // max background stddev after filtering
};

struct Calibration {
    double sigma_e = 0.0;
    bool satisfied = false; // false: no grid sigma met both thresholds
    RegionStats background;  // K stats at the returned sigma
};

/// Smallest grid sigma whose separable blur brings the K-region mean and
/// stddev under the thresholds; the largest grid sigma (with a warning
/// flag) when none does.
Calibration calibrate_sigma_e(const ImageGrid& image, const Segmentation& seg,
                              const CalibrationThresholds& thresholds,
                              const MdlConfig& cfg);

Calibration calibrate_sigma_e(const ImageGrid& image, const SmoothedStack& stack,
                              const Segmentation& seg,
                              const CalibrationThresholds& thresholds,
                              const MdlConfig& cfg);

struct SigmaField {
    ImageGrid sigmas;
    double sigma_s = 0.0;
    double sigma_m = 0.0;
    double sigma_e = 0.0;
    SigmaProfile profile;
    Calibration calibration;
};

/// Per-pixel filter widths: MDL-optimal widths inside the cloud (region J),
/// the calibrated sigma_e outside (region K), and the radial profile across
/// the transition ring (region L).
SigmaField build_sigma_field(const ImageGrid& image, const Segmentation& seg,
                             const CalibrationThresholds& thresholds,
                             const MdlConfig& cfg);

SigmaField build_sigma_field(const ImageGrid& image, const SmoothedStack& stack,
                             const Segmentation& seg,
                             const CalibrationThresholds& thresholds,
                             const MdlConfig& cfg);

} // namespace atomshadow
