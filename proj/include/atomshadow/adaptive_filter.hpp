#pragma once

#include "atomshadow/image.hpp"
#include "atomshadow/mdl.hpp"
#include "atomshadow/segmentation.hpp"
#include "atomshadow/sigma_field.hpp"

namespace atomshadow {

struct AdaptiveFilterConfig {
    MdlConfig mdl;
    CalibrationThresholds thresholds;
    int crop_width = 101;
    double log_sigma = 3.0; // blob-detection scale for centering
};

struct AdaptiveFilterResult {
    ImageGrid filtered;      // filtered crop in the input's units
    ImageGrid filtered_norm; // same crop on the [0,1] working scale
    ImageGrid raw_crop;      // unfiltered crop in the input's units
    ImageGrid raw_norm;      // unfiltered crop on the working scale
    Segmentation segmentation;
    SigmaField field;
    Center center;       // detected cloud center in input coordinates
    double scale = 1.0;  // input = norm * scale + offset
    double offset = 0.0;
};

/// The full adaptive pipeline on an OD map: normalize, locate the cloud,
/// crop, segment, build the per-pixel width field and run the spatially
/// varying blur. Output is de-normalized back to input units.
AdaptiveFilterResult adaptive_filter(const ImageGrid& od,
                                     const AdaptiveFilterConfig& cfg = {});

/// Same pipeline on an externally chosen center (multi-component imaging
/// re-runs the single-component pipeline per detected component).
AdaptiveFilterResult adaptive_filter_at(const ImageGrid& od, Center center,
                                        const AdaptiveFilterConfig& cfg = {});

} // namespace atomshadow
