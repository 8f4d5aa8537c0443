#include "atomshadow/sigma_field.hpp"

#include "atomshadow/errors.hpp"

#include <algorithm>
#include <cmath>

namespace atomshadow {

double SigmaProfile::value(double r) const {
    if (flat) return sigma_s;
    if (r <= r_s) return sigma_s;
    if (r >= r_e) return sigma_e;
    if (r == r_m) return sigma_m;
    if (r < r_m) {
        return sigma_s + power_a * std::pow(r - r_s, power_p);
    }
    if (parabolic_landing) {
        const double u = (r_e - r) / (r_e - r_m);
        return sigma_e - (sigma_e - sigma_m) * u * u;
    }
    const double d = r - r_e;
    return arc_yc + arc_sign * std::sqrt(arc_radius * arc_radius - d * d);
}

SigmaProfile make_sigma_profile(double r_s, double r_m, double r_e, double sigma_s,
                                double sigma_e) {
    if (!(0.0 < r_s && r_s < r_m && r_m < r_e)) {
        throw ValidationError("sigma profile needs 0 < r_s < r_m < r_e");
    }
    if (!(sigma_s > 0.0) || !(sigma_e > 0.0)) {
        throw ValidationError("sigma profile endpoints must be > 0");
    }
    SigmaProfile profile;
    profile.r_s = r_s;
    profile.r_m = r_m;
    profile.r_e = r_e;
    profile.sigma_s = sigma_s;
    profile.sigma_e = sigma_e;
    profile.sigma_m = 0.5 * (sigma_s + sigma_e);

    if (sigma_s == sigma_e) {
        profile.flat = true;
        return profile;
    }

    const double dr = r_e - r_m;                    // half-ring width
    const double ds = sigma_e - profile.sigma_m;    // arc height
    const double sign = ds > 0.0 ? 1.0 : -1.0;
    double landing_slope; // |d sigma/d r| of the landing branch at r_m

    if (std::fabs(ds) <= dr) {
        // Circle through (r_m, sigma_m) and (r_e, sigma_e) with zero slope
        // at r_e: center sits at (r_e, sigma_e -/+ R).
        profile.arc_radius = (dr * dr + ds * ds) / (2.0 * std::fabs(ds));
        profile.arc_sign = sign;
        profile.arc_yc = sigma_e - sign * profile.arc_radius;
        landing_slope = dr / (profile.arc_radius - std::fabs(ds));
    } else {
        // No monotone zero-slope arc exists this steep; use the osculating
        // parabola with the same endpoint values and flat landing.
        profile.parabolic_landing = true;
        landing_slope = 2.0 * std::fabs(ds) / dr;
    }

    // Power exponent from the C1 join at r_m, clamped to [1, 8].
    const double rise = profile.sigma_m - sigma_s; // same sign as ds
    double p = landing_slope * (r_m - r_s) / std::fabs(rise);
    p = std::clamp(p, 1.0, 8.0);
    profile.power_p = p;
    profile.power_a = rise / std::pow(r_m - r_s, p);
    return profile;
}

Calibration calibrate_sigma_e(const ImageGrid& image, const SmoothedStack& stack,
                              const Segmentation& seg,
                              const CalibrationThresholds& thresholds,
                              const MdlConfig& cfg) {
    (void)cfg;
    require_valid(image, "calibration input");
    if (seg.mask_K.empty()) {
        throw SegmentationError("calibration: background region K is empty");
    }
    Calibration result;
    for (size_t i = 0; i < stack.sigmas.size(); ++i) {
        const RegionStats stats = region_stats(stack.smoothed[i], seg.mask_K);
        result.sigma_e = stack.sigmas[i];
        result.background = stats;
        if (stats.mean <= thresholds.mk_max && stats.stddev <= thresholds.sk_max) {
            result.satisfied = true;
            return result;
        }
    }
    result.satisfied = false; // keep the largest grid sigma
    return result;
}

Calibration calibrate_sigma_e(const ImageGrid& image, const Segmentation& seg,
                              const CalibrationThresholds& thresholds,
                              const MdlConfig& cfg) {
    return calibrate_sigma_e(image, make_smoothed_stack(image, cfg), seg, thresholds,
                             cfg);
}

SigmaField build_sigma_field(const ImageGrid& image, const SmoothedStack& stack,
                             const Segmentation& seg,
                             const CalibrationThresholds& thresholds,
                             const MdlConfig& cfg) {
    require_valid(image, "sigma field input");
    if (seg.mask_J.empty()) throw SegmentationError("sigma field: empty cloud region");

    SigmaField field;
    field.calibration = calibrate_sigma_e(image, stack, seg, thresholds, cfg);
    field.sigma_e = field.calibration.sigma_e;

    const std::vector<double> cloud_sigmas =
        mdl_best_sigma_map(image, stack, seg.mask_J, cfg);
    field.sigma_s = *std::min_element(cloud_sigmas.begin(), cloud_sigmas.end());
    field.sigma_m = 0.5 * (field.sigma_s + field.sigma_e);
    field.profile = make_sigma_profile(seg.r_s, seg.r_m, seg.r_e, field.sigma_s,
                                       field.sigma_e);

    field.sigmas = ImageGrid(image.width, image.height, field.sigma_e,
                             image.pixel_pitch_um);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const double r = std::hypot(x - seg.center_x, y - seg.center_y);
            if (r > seg.r_s) {
                field.sigmas.at(x, y) = field.profile.value(r);
            }
        }
    }
    for (size_t i = 0; i < seg.mask_J.size(); ++i) {
        field.sigmas.pixels[seg.mask_J[i]] = cloud_sigmas[i];
    }
    return field;
}

SigmaField build_sigma_field(const ImageGrid& image, const Segmentation& seg,
                             const CalibrationThresholds& thresholds,
                             const MdlConfig& cfg) {
    return build_sigma_field(image, make_smoothed_stack(image, cfg), seg, thresholds,
                             cfg);
}

} // namespace atomshadow
