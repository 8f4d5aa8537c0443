#include "atomshadow/gray_transform.hpp"

#include "atomshadow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace atomshadow {

namespace {

RegionStats stats_of(std::span<const double> values) {
    RegionStats stats;
    stats.count = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    stats.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) {
        const double d = v - stats.mean;
        sq += d * d;
    }
    stats.stddev = std::sqrt(sq / static_cast<double>(values.size()));
    return stats;
}

std::vector<double> masked_values(const ImageGrid& image, std::span<const size_t> mask) {
    std::vector<double> values(mask.size());
    for (size_t i = 0; i < mask.size(); ++i) values[i] = image.pixels[mask[i]];
    return values;
}

} // namespace

KneeDetection detect_knees(const ImageGrid& filtered, const Segmentation& seg) {
    require_valid(filtered, "detect_knees input");
    if (seg.mask_J.size() < 10 || seg.mask_K.size() < 10) {
        throw SegmentationError("knee detection needs >= 10 pixels in both regions");
    }

    std::vector<double> cloud = masked_values(filtered, seg.mask_J);
    std::partial_sort(cloud.begin(), cloud.begin() + 10, cloud.end());
    std::vector<double> background = masked_values(filtered, seg.mask_K);
    std::partial_sort(background.begin(), background.begin() + 10, background.end(),
                      std::greater<double>());

    KneeDetection knees;
    knees.p_minima = stats_of(std::span<const double>(cloud.data(), 10));
    knees.q_maxima = stats_of(std::span<const double>(background.data(), 10));

    double g_h = knees.p_minima.mean - 3.0 * knees.p_minima.stddev;
    if (!(g_h > 0.0)) {
        g_h = knees.p_minima.mean;
        knees.fallback = true;
    }
    if (!(g_h > 0.0)) {
        throw SegmentationError(
            "knee detection: cloud region minima are non-positive, no usable knees");
    }
    double g_l = knees.q_maxima.mean + 3.0 * knees.q_maxima.stddev;
    if (!(g_l > 0.0) || g_l >= g_h) {
        g_l = 0.5 * g_h;
        knees.fallback = true;
    }
    knees.g_l = g_l;
    knees.g_h = g_h;
    return knees;
}

GrayParams solve_gray_params(double g_l, double g_h, double kappa) {
    if (!(g_l > 0.0 && g_l < g_h)) {
        std::ostringstream msg;
        msg << "knees must satisfy 0 < g_l < g_h, got g_l=" << g_l << " g_h=" << g_h;
        throw ValidationError(msg.str());
    }
    if (!(kappa > 0.0 && kappa < 1.0)) {
        throw ValidationError("kappa must lie in (0,1)");
    }

    GrayParams p;
    p.g_l = g_l;
    p.g_h = g_h;
    p.kappa = kappa;
    p.y1 = kappa * g_l;

    // Circle through (g_l, y1) and (g_h, g_h), tangent to the identity at
    // (g_h, g_h): the tangency pins b = 2 g_h - a and r^2 = 2 (g_h - a)^2,
    // and the first point then fixes a in closed form.
    p.a = (g_l * g_l + p.y1 * p.y1 - 4.0 * p.y1 * g_h + 2.0 * g_h * g_h) /
          (2.0 * (g_l - p.y1));
    p.b = 2.0 * g_h - p.a;
    p.r = std::sqrt(2.0) * std::fabs(g_h - p.a);

    // Suppressive solutions put the center below-right of the identity
    // line; anything else cannot be monotone on [g_l, g_h].
    if (!(p.a > g_h) || !(p.r * p.r > (g_l - p.a) * (g_l - p.a))) {
        throw ParameterError(
            "gray transform arc is not monotone for these knees; try another kappa");
    }

    // Gamma from slope continuity at g_l.
    const double denom = p.y1 * (p.y1 - p.b);
    if (!(denom != 0.0)) {
        throw ParameterError("gray transform gamma is singular; try another kappa");
    }
    p.gamma = -g_l * (g_l - p.a) / denom;
    if (!(p.gamma > 0.0) || p.gamma > 50.0) {
        std::ostringstream msg;
        msg << "gray transform gamma " << p.gamma
            << " outside (0, 50]; try another kappa";
        throw ParameterError(msg.str());
    }
    p.m = p.y1 / std::pow(g_l, p.gamma);
    return p;
}

double gray_value(double g, const GrayParams& params) {
    if (g >= params.g_h) return g; // identity branch, also covers g > 1
    if (g < 0.0) return g;         // out of range, pass through
    if (g < params.g_l) return params.m * std::pow(g, params.gamma);
    const double d = g - params.a;
    const double under = params.r * params.r - d * d;
    return params.b + std::sqrt(std::max(under, 0.0));
}

GrayResult apply_gray_transform(const ImageGrid& image, const GrayParams& params) {
    require_valid(image, "gray transform input");
    if (!(params.g_l > 0.0 && params.g_l < params.g_h) ||
        std::fabs(params.b - (2.0 * params.g_h - params.a)) > 1e-9 ||
        std::fabs(params.r * params.r - 2.0 * (params.g_h - params.a) *
                                            (params.g_h - params.a)) > 1e-9) {
        throw ParameterError("gray transform parameters violate their invariants");
    }
    GrayResult result;
    result.image = ImageGrid(image.width, image.height, 0.0, image.pixel_pitch_um);
    for (size_t i = 0; i < image.pixels.size(); ++i) {
        const double g = image.pixels[i];
        if (g < 0.0 || g > 1.0) ++result.out_of_range_pixels;
        result.image.pixels[i] = gray_value(g, params);
    }
    return result;
}

} // namespace atomshadow
