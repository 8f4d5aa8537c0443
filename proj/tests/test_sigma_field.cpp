#include "atomshadow/sigma_field.hpp"

#include "atomshadow/convolve.hpp"
#include "atomshadow/errors.hpp"
#include "atomshadow/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace atomshadow;

namespace {

ImageGrid cloud_with_background(int size, double sigma, double amplitude,
                                double bg_level, double bg_noise, uint64_t seed) {
    CounterRng rng(seed, 0);
    ImageGrid image(size, size, 0.0);
    const double c = (size - 1) / 2.0;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double r2 = (x - c) * (x - c) + (y - c) * (y - c);
            image.at(x, y) = bg_level + rng.next_normal(0.0, bg_noise) +
                             amplitude * std::exp(-r2 / (2.0 * sigma * sigma));
        }
    }
    return image;
}

} // namespace

TEST_CASE("profile hits the breakpoints exactly") {
    const SigmaProfile profile = make_sigma_profile(19.479, 24.914, 30.349, 1.0, 5.0);
    CHECK(profile.value(19.479) == 1.0);
    CHECK(profile.value(24.914) == 3.0);
    CHECK(profile.value(30.349) == 5.0);
    CHECK(profile.value(60.0) == 5.0);
    CHECK(profile.value(5.0) == 1.0);
    CHECK(profile.sigma_m == 3.0);
}

TEST_CASE("profile is monotone with a flat landing at r_e") {
    const double r_s = 19.479, r_e = 30.349;
    const SigmaProfile profile = make_sigma_profile(r_s, 0.5 * (r_s + r_e), r_e, 1.0, 5.0);
    double prev = profile.value(r_s);
    const double step = 1e-3;
    for (double r = r_s + step; r <= r_e + 1.0; r += step) {
        const double v = profile.value(r);
        CHECK(v >= prev - 1e-12);
        prev = v;
    }
    const double slope = (profile.value(r_e) - profile.value(r_e - 1e-6)) / 1e-6;
    CHECK(std::fabs(slope) < 1e-6);
}

TEST_CASE("profile samples stay within the analytic slope bound") {
    const SigmaProfile profile = make_sigma_profile(10.0, 15.0, 20.0, 0.8, 4.2);
    // Analytic slope bounds per branch: power slope peaks at r_m, the
    // landing slope peaks there too.
    const double power_slope =
        profile.power_p * std::fabs(profile.sigma_m - profile.sigma_s) / 5.0;
    const double landing_slope =
        profile.parabolic_landing
            ? 2.0 * std::fabs(profile.sigma_e - profile.sigma_m) / 5.0
            : 5.0 / (profile.arc_radius - std::fabs(profile.sigma_e - profile.sigma_m));
    const double bound = 2.0 * std::max(power_slope, landing_slope);
    const double step = 0.01;
    for (double r = 10.0; r < 21.0; r += step) {
        CHECK(std::fabs(profile.value(r + step) - profile.value(r)) <= bound * step);
    }
}

TEST_CASE("equal endpoint widths collapse the profile to a constant") {
    const SigmaProfile profile = make_sigma_profile(10.0, 15.0, 20.0, 2.5, 2.5);
    CHECK(profile.flat);
    for (double r : {0.0, 12.0, 15.0, 19.0, 25.0}) {
        CHECK(profile.value(r) == 2.5);
    }
}

TEST_CASE("a noisier cloud than background interpolates downward") {
    const SigmaProfile profile = make_sigma_profile(10.0, 15.0, 20.0, 5.0, 1.0);
    CHECK(profile.value(10.0) == 5.0);
    CHECK(profile.value(20.0) == 1.0);
    double prev = profile.value(10.0);
    for (double r = 10.01; r <= 20.0; r += 0.01) {
        const double v = profile.value(r);
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
}

TEST_CASE("steep endpoints fall back to the parabolic landing") {
    // |sigma_e - sigma_m| = 4 > r_e - r_m = 2: no monotone zero-slope arc.
    const SigmaProfile profile = make_sigma_profile(10.0, 12.0, 14.0, 1.0, 9.0);
    CHECK(profile.parabolic_landing);
    CHECK(profile.value(12.0) == 5.0);
    CHECK(profile.value(14.0) == 9.0);
    const double slope = (profile.value(14.0) - profile.value(14.0 - 1e-6)) / 1e-6;
    CHECK(std::fabs(slope) < 1e-5);
}

TEST_CASE("calibration returns the smallest grid sigma once thresholds hold") {
    // Background mean 0.02, spread 0.004: already inside both thresholds.
    ImageGrid image = cloud_with_background(101, 9.0, 1.0, 0.02, 0.004, 31);
    const Segmentation seg = segment(image);
    MdlConfig cfg;
    const Calibration cal = calibrate_sigma_e(image, seg, {}, cfg);
    CHECK(cal.satisfied);
    CHECK(cal.sigma_e == cfg.sigma_grid().front());
}

TEST_CASE("calibration scans until the background spread is tamed") {
    // Mean-zero background with sigma 0.2: the stddev threshold drives the
    // scan to roughly 4x smoothing, sigma_e near 4 / (2 sqrt(pi)).
    ImageGrid image = cloud_with_background(101, 9.0, 1.0, 0.0, 0.2, 77);
    const Segmentation seg = segment(image);
    MdlConfig cfg;
    const Calibration cal = calibrate_sigma_e(image, seg, {}, cfg);
    CHECK(cal.satisfied);
    CHECK(cal.background.stddev <= 0.05);
    const double analytic = 4.0 / (2.0 * std::sqrt(M_PI));
    CHECK(cal.sigma_e > analytic / 1.2);
    CHECK(cal.sigma_e < analytic * 1.35);

    // One step earlier the spread must still be too large.
    const std::vector<double> grid = cfg.sigma_grid();
    const auto it = std::find(grid.begin(), grid.end(), cal.sigma_e);
    REQUIRE(it != grid.end());
    REQUIRE(it != grid.begin());
    const ImageGrid previous = convolve_separable(image, *(it - 1));
    const RegionStats stats = region_stats(previous, seg.mask_K);
    CHECK((stats.stddev > 0.05 || stats.mean > 0.1));
}

TEST_CASE("the default thresholds accept a well-filtered background") {
    // Reference filtered-background statistics: comfortably inside both
    // the mean and stddev gates.
    const CalibrationThresholds thresholds;
    CHECK(0.021 <= thresholds.mk_max);
    CHECK(0.005 <= thresholds.sk_max);
    // ... while the unfiltered statistics fail the mean gate.
    CHECK(0.126 > thresholds.mk_max);
}

TEST_CASE("calibration flags backgrounds it cannot tame") {
    // Background offset 0.5 never passes the mean threshold (blur preserves it).
    ImageGrid image = cloud_with_background(101, 9.0, 1.0, 0.5, 0.01, 5);
    const Segmentation seg = segment(image);
    MdlConfig cfg;
    const Calibration cal = calibrate_sigma_e(image, seg, {}, cfg);
    CHECK_FALSE(cal.satisfied);
    CHECK(cal.sigma_e == cfg.sigma_grid().back());
}

TEST_CASE("the built field honors the regions and breakpoints") {
    ImageGrid image = cloud_with_background(101, 9.0, 1.0, 0.05, 0.02, 99);
    const Segmentation seg = segment(image);
    MdlConfig cfg;
    cfg.sigma_points = 24; // lighter stack for the test
    const SigmaField field = build_sigma_field(image, seg, {}, cfg);

    CHECK(field.sigma_m == 0.5 * (field.sigma_s + field.sigma_e));
    const std::vector<double> grid = cfg.sigma_grid();
    CHECK(std::find(grid.begin(), grid.end(), field.sigma_s) != grid.end());
    CHECK(std::find(grid.begin(), grid.end(), field.sigma_e) != grid.end());

    // K region pixels carry sigma_e; J pixels carry grid values >= sigma_s.
    for (size_t idx : seg.mask_K) {
        CHECK(field.sigmas.pixels[idx] == field.sigma_e);
    }
    for (size_t idx : seg.mask_J) {
        CHECK(field.sigmas.pixels[idx] >= field.sigma_s);
        CHECK(std::find(grid.begin(), grid.end(), field.sigmas.pixels[idx]) !=
              grid.end());
    }
    // The minimum over J is sigma_s by construction.
    double min_j = 1e9;
    for (size_t idx : seg.mask_J) min_j = std::min(min_j, field.sigmas.pixels[idx]);
    CHECK(min_j == field.sigma_s);

    // Field continuity along 16 rays outside the cloud core.
    const double max_slope =
        std::max(field.profile.power_p *
                     std::fabs(field.sigma_m - field.sigma_s) / (seg.r_m - seg.r_s),
                 2.0 * std::fabs(field.sigma_e - field.sigma_m) / (seg.r_e - seg.r_m));
    for (int ray = 0; ray < 16; ++ray) {
        const double angle = 2.0 * M_PI * ray / 16.0;
        const double step = 0.5;
        double prev = field.profile.value(seg.r_s);
        for (double r = seg.r_s + step; r < seg.r_e + 3.0; r += step) {
            const double v = field.profile.value(r);
            CHECK(std::fabs(v - prev) <= 2.0 * max_slope * step + 1e-12);
            prev = v;
            (void)angle;
        }
    }
}
