#include "atomshadow/adaptive_filter.hpp"

#include "atomshadow/convolve.hpp"
#include "atomshadow/errors.hpp"

namespace atomshadow {

namespace {

AdaptiveFilterResult run_pipeline(const ImageGrid& od, const Normalized& norm,
                                  Center center, const AdaptiveFilterConfig& cfg) {
    AdaptiveFilterResult result;
    result.center = center;
    result.scale = norm.scale;
    result.offset = norm.offset;

    result.raw_crop = crop_centered(od, center, cfg.crop_width);
    result.raw_norm = crop_centered(norm.image, center, cfg.crop_width);
    result.segmentation = segment(result.raw_norm);

    const SmoothedStack stack = make_smoothed_stack(result.raw_norm, cfg.mdl);
    result.field = build_sigma_field(result.raw_norm, stack, result.segmentation,
                                     cfg.thresholds, cfg.mdl);
    result.filtered_norm = convolve_varying(result.raw_norm, result.field.sigmas);
    result.filtered = denormalize(result.filtered_norm, norm.scale, norm.offset);
    return result;
}

} // namespace

AdaptiveFilterResult adaptive_filter(const ImageGrid& od,
                                     const AdaptiveFilterConfig& cfg) {
    require_valid(od, "adaptive_filter input");
    const Normalized norm = normalize_unit(od);
    const Center center = find_center(norm.image, cfg.log_sigma);
    return run_pipeline(od, norm, center, cfg);
}

AdaptiveFilterResult adaptive_filter_at(const ImageGrid& od, Center center,
                                        const AdaptiveFilterConfig& cfg) {
    require_valid(od, "adaptive_filter input");
    const Normalized norm = normalize_unit(od);
    return run_pipeline(od, norm, center, cfg);
}

} // namespace atomshadow
