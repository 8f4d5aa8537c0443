#include "atomshadow/enhance.hpp"

#include "atomshadow/errors.hpp"

#include <cmath>

namespace atomshadow {

namespace {

BackgroundStats background_stats(const ImageGrid& input_units,
                                 const ImageGrid& working_scale,
                                 const Segmentation& seg) {
    BackgroundStats stats;
    stats.input_units = region_stats(input_units, seg.mask_K);
    stats.working_scale = region_stats(working_scale, seg.mask_K);
    const double lo = min_pixel(input_units);
    const double hi = max_pixel(input_units);
    if (hi > lo) {
        stats.display_scale.mean = (stats.input_units.mean - lo) / (hi - lo);
        stats.display_scale.stddev = stats.input_units.stddev / (hi - lo);
        stats.display_scale.count = stats.input_units.count;
    } else {
        stats.display_scale = stats.input_units;
    }
    return stats;
}

EnhanceResult finish(AdaptiveFilterResult&& filter, const EnhanceConfig& cfg) {
    EnhanceResult result;
    result.filter = std::move(filter);

    const Segmentation& seg = result.filter.segmentation;
    result.knees = detect_knees(result.filter.filtered_norm, seg);

    // Tightly spaced knees can make the arc/gamma geometry infeasible at the
    // requested kappa. Walk kappa toward 1 (gentler suppression); if the
    // knees are still too close, re-space them with the documented fallback
    // rule g_l = g_h / 2. The run stays fully automatic either way.
    double kappa = cfg.kappa;
    bool knees_respaced = false;
    for (int attempt = 0;; ++attempt) {
        try {
            result.gray = solve_gray_params(result.knees.g_l, result.knees.g_h, kappa);
            break;
        } catch (const ParameterError&) {
            if (attempt < 4) {
                kappa = 0.5 * (1.0 + kappa);
                ++result.kappa_retries;
            } else if (!knees_respaced) {
                knees_respaced = true;
                result.knees.g_l = 0.5 * result.knees.g_h;
                result.knees.fallback = true;
                kappa = cfg.kappa;
            } else {
                throw;
            }
        }
    }

    GrayResult gray = apply_gray_transform(result.filter.filtered_norm, result.gray);
    result.enhanced_norm = std::move(gray.image);
    result.out_of_range_pixels = gray.out_of_range_pixels;
    result.enhanced = denormalize(result.enhanced_norm, result.filter.scale,
                                  result.filter.offset);

    result.bg_raw = background_stats(result.filter.raw_crop, result.filter.raw_norm, seg);
    result.bg_filtered =
        background_stats(result.filter.filtered, result.filter.filtered_norm, seg);
    result.bg_enhanced =
        background_stats(result.enhanced, result.enhanced_norm, seg);
    return result;
}

} // namespace

EnhanceResult enhance(const ImageGrid& od, const EnhanceConfig& cfg) {
    return finish(adaptive_filter(od, cfg.filter), cfg);
}

EnhanceResult enhance_at(const ImageGrid& od, Center center, const EnhanceConfig& cfg) {
    return finish(adaptive_filter_at(od, center, cfg.filter), cfg);
}

GaussFit1D fit_core_cross_section(const ImageGrid& crop, const Segmentation& seg) {
    const int row = static_cast<int>(std::llround(seg.center_y));
    const double window = 1.2 * seg.r_s;
    std::vector<ProfilePoint> pts;
    for (int x = 0; x < crop.width; ++x) {
        if (std::fabs(x - seg.center_x) > window) continue;
        pts.push_back({static_cast<double>(x), crop.at(x, row)});
    }
    if (pts.size() < 5) {
        throw SegmentationError("core cross-section window is too narrow to fit");
    }
    return fit_gaussian_1d(pts);
}

std::vector<size_t> atom_disk_mask(const Segmentation& seg) {
    std::vector<size_t> mask = seg.mask_J;
    mask.insert(mask.end(), seg.mask_L.begin(), seg.mask_L.end());
    return mask;
}

} // namespace atomshadow
