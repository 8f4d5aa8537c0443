#pragma once

#include "atomshadow/adaptive_filter.hpp"
#include "atomshadow/gray_transform.hpp"

namespace atomshadow {

struct EnhanceConfig {
    AdaptiveFilterConfig filter;
    double kappa = 0.5; // gray-transform knee fraction, y1 = kappa * g_l
};

/// Background statistics of one crop over mask_K on three scales: the
/// input units, the shared [0,1] working scale of the run, and the image's
/// own [0,1] display scale (min/max of that crop), which is what gray-level
/// histograms of displayed images report.
struct BackgroundStats {
    RegionStats input_units;
    RegionStats working_scale;
    RegionStats display_scale;
};

struct EnhanceResult {
    AdaptiveFilterResult filter;
    KneeDetection knees;
    GrayParams gray;         // gray.kappa is the kappa that actually solved
    int kappa_retries = 0;   // times kappa was relaxed toward 1
    ImageGrid enhanced_norm; // gray-transformed crop, working scale
    ImageGrid enhanced;      // same, in input units
    size_t out_of_range_pixels = 0;
    BackgroundStats bg_raw;
    BackgroundStats bg_filtered;
    BackgroundStats bg_enhanced;
};

/// Adaptive filtering followed by the nonlinear gray transform. Pixels at
/// or above g_h keep their filtered values bit-exactly.
EnhanceResult enhance(const ImageGrid& od, const EnhanceConfig& cfg = {});

EnhanceResult enhance_at(const ImageGrid& od, Center center,
                         const EnhanceConfig& cfg = {});

/// Size measurement for a processed crop: Gaussian fit of the row through
/// the segmentation center, restricted to 1.2 r_s around it. The window
/// keeps the far tail (where the background-level blur dominates) out of
/// the fit.
GaussFit1D fit_core_cross_section(const ImageGrid& crop, const Segmentation& seg);

/// The atom disk r <= r_e as a pixel mask (regions J and L together).
std::vector<size_t> atom_disk_mask(const Segmentation& seg);

} // namespace atomshadow
