#include "atomshadow/gray_transform.hpp"

#include "atomshadow/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace atomshadow;

namespace {

// A crop with hand-placed region values: mask_J indices carry the cloud
// values, mask_K the background values.
struct FakeRegions {
    ImageGrid image;
    Segmentation seg;
};

FakeRegions make_regions(const std::vector<double>& cloud,
                         const std::vector<double>& background) {
    FakeRegions f;
    const size_t n = cloud.size() + background.size();
    const int w = static_cast<int>(n);
    f.image = ImageGrid(w, 1, 0.0);
    for (size_t i = 0; i < cloud.size(); ++i) {
        f.image.pixels[i] = cloud[i];
        f.seg.mask_J.push_back(i);
    }
    for (size_t i = 0; i < background.size(); ++i) {
        f.image.pixels[cloud.size() + i] = background[i];
        f.seg.mask_K.push_back(cloud.size() + i);
    }
    return f;
}

std::vector<double> constant_block(size_t n, double v) {
    return std::vector<double>(n, v);
}

} // namespace

TEST_CASE("knees from zero-spread region extremes") {
    const FakeRegions f = make_regions(constant_block(12, 0.6),
                                       constant_block(15, 0.1));
    const KneeDetection knees = detect_knees(f.image, f.seg);
    CHECK(knees.g_h == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(knees.g_l == doctest::Approx(0.1).epsilon(1e-12));
    CHECK_FALSE(knees.fallback);
}

TEST_CASE("knees follow the three-sigma arithmetic") {
    // Ten cloud minima: five at 0.48, five at 0.52 -> mean 0.5, stddev 0.02.
    std::vector<double> cloud;
    for (int i = 0; i < 5; ++i) cloud.push_back(0.48);
    for (int i = 0; i < 5; ++i) cloud.push_back(0.52);
    for (int i = 0; i < 6; ++i) cloud.push_back(0.9); // rest of the cloud
    // Ten background maxima: five at 0.07, five at 0.09 -> mean 0.08, stddev 0.01.
    std::vector<double> background;
    for (int i = 0; i < 5; ++i) background.push_back(0.09);
    for (int i = 0; i < 5; ++i) background.push_back(0.07);
    for (int i = 0; i < 10; ++i) background.push_back(0.01);

    const FakeRegions f = make_regions(cloud, background);
    const KneeDetection knees = detect_knees(f.image, f.seg);
    CHECK(knees.g_h == doctest::Approx(0.44).epsilon(1e-9));
    CHECK(knees.g_l == doctest::Approx(0.11).epsilon(1e-9));
}

TEST_CASE("overlapping regions trigger the documented fallback") {
    const FakeRegions f = make_regions(constant_block(12, 0.3),
                                       constant_block(15, 0.4));
    const KneeDetection knees = detect_knees(f.image, f.seg);
    CHECK(knees.fallback);
    CHECK(knees.g_l == doctest::Approx(0.5 * knees.g_h).epsilon(1e-12));
    CHECK(knees.g_l > 0.0);
    CHECK(knees.g_l < knees.g_h);
}

TEST_CASE("small regions are rejected") {
    const FakeRegions f = make_regions(constant_block(4, 0.6),
                                       constant_block(15, 0.1));
    CHECK_THROWS_AS(detect_knees(f.image, f.seg), SegmentationError);
}

TEST_CASE("solved parameters satisfy both circle constraints") {
    const GrayParams p = solve_gray_params(0.1, 0.6, 0.5);
    CHECK(p.y1 == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(p.b == doctest::Approx(2.0 * p.g_h - p.a).epsilon(1e-12));
    CHECK(p.r * p.r ==
          doctest::Approx(2.0 * (p.g_h - p.a) * (p.g_h - p.a)).epsilon(1e-9));
    const double on_knee = (p.g_l - p.a) * (p.g_l - p.a) +
                           (p.y1 - p.b) * (p.y1 - p.b) - p.r * p.r;
    CHECK(std::fabs(on_knee) < 1e-9);
    const double on_identity = (p.g_h - p.a) * (p.g_h - p.a) +
                               (p.g_h - p.b) * (p.g_h - p.b) - p.r * p.r;
    CHECK(std::fabs(on_identity) < 1e-9);
}

TEST_CASE("tangency at the high knee: value g_h, slope one") {
    for (double kappa : {0.3, 0.5, 0.7}) {
        const GrayParams p = solve_gray_params(0.12, 0.55, kappa);
        CHECK(std::fabs(gray_value(std::nextafter(p.g_h, 0.0), p) - p.g_h) < 1e-9);
        const double h = 1e-6;
        const double slope = (gray_value(p.g_h, p) - gray_value(p.g_h - h, p)) / h;
        CHECK(std::fabs(slope - 1.0) < 1e-6);
    }
}

TEST_CASE("both branch pairs agree at their knees") {
    const GrayParams p = solve_gray_params(0.1, 0.6, 0.5);
    // gamma and arc branch evaluated at g_l
    const double gamma_at = p.m * std::pow(p.g_l, p.gamma);
    const double arc_at =
        p.b + std::sqrt(p.r * p.r - (p.g_l - p.a) * (p.g_l - p.a));
    CHECK(std::fabs(gamma_at - arc_at) < 1e-9);
    CHECK(std::fabs(gamma_at - p.y1) < 1e-12);
    // arc and identity at g_h
    const double arc_high =
        p.b + std::sqrt(p.r * p.r - (p.g_h - p.a) * (p.g_h - p.a));
    CHECK(std::fabs(arc_high - p.g_h) < 1e-9);
    // slope continuity at g_l
    const double h = 1e-6;
    const double gamma_slope =
        (gray_value(p.g_l - h, p) - gray_value(p.g_l - 2.0 * h, p)) / h;
    const double arc_slope =
        (gray_value(p.g_l + 2.0 * h, p) - gray_value(p.g_l + h, p)) / h;
    CHECK(std::fabs(gamma_slope - arc_slope) < 1e-4);
    // no jump across either knee
    CHECK(std::fabs(gray_value(p.g_l + 1e-6, p) - gray_value(p.g_l - 1e-6, p)) < 1e-5);
    CHECK(std::fabs(gray_value(p.g_h + 1e-6, p) - gray_value(p.g_h - 1e-6, p)) < 1e-5);
}

TEST_CASE("kappa near one approaches the identity with gentle suppression") {
    const GrayParams mid = solve_gray_params(0.1, 0.6, 0.5);
    const GrayParams high = solve_gray_params(0.1, 0.6, 0.9);
    const GrayParams higher = solve_gray_params(0.1, 0.6, 0.99);
    CHECK(higher.gamma < high.gamma);
    CHECK(high.gamma < mid.gamma);
    CHECK(higher.gamma > 1.0 - 1e-9);
    // Less suppression as kappa -> 1.
    CHECK(gray_value(0.05, higher) > gray_value(0.05, high));
    CHECK(gray_value(0.05, high) > gray_value(0.05, mid));
}

TEST_CASE("invalid knees and kappas are rejected") {
    CHECK_THROWS_AS(solve_gray_params(0.6, 0.1, 0.5), ValidationError);
    CHECK_THROWS_AS(solve_gray_params(0.0, 0.5, 0.5), ValidationError);
    CHECK_THROWS_AS(solve_gray_params(0.1, 0.6, 0.0), ValidationError);
    CHECK_THROWS_AS(solve_gray_params(0.1, 0.6, 1.0), ValidationError);
    // Extreme kappa drives gamma over the documented cap.
    CHECK_THROWS_AS(solve_gray_params(0.1, 0.6, 1e-4), ParameterError);
}

TEST_CASE("the transform is monotone, suppressive and identity above g_h") {
    const GrayParams p = solve_gray_params(0.15, 0.5, 0.5);
    double prev = -1.0;
    for (int i = 0; i <= 10000; ++i) {
        const double g = static_cast<double>(i) / 10000.0;
        const double out = gray_value(g, p);
        CHECK(out >= prev);
        CHECK(out >= 0.0);
        CHECK(out <= 1.0);
        if (g >= p.g_h) CHECK(out == g);
        if (g < p.g_l && g > 0.0) CHECK(out < g);
        prev = out;
    }
    CHECK(gray_value(0.0, p) == 0.0);
}

TEST_CASE("apply_gray_transform counts out-of-range pixels and keeps them") {
    const GrayParams p = solve_gray_params(0.1, 0.6, 0.5);
    ImageGrid image(4, 1, 0.0);
    image.pixels = {0.05, 0.3, 0.95, 1.5};
    const GrayResult result = apply_gray_transform(image, p);
    CHECK(result.out_of_range_pixels == 1);
    CHECK(result.image.pixels[3] == 1.5);
    CHECK(result.image.pixels[2] == 0.95);
    CHECK(result.image.pixels[0] < 0.05);
}

TEST_CASE("apply_gray_transform validates parameter invariants") {
    GrayParams broken = solve_gray_params(0.1, 0.6, 0.5);
    broken.b += 1e-3;
    ImageGrid image(2, 1, 0.5);
    CHECK_THROWS_AS(apply_gray_transform(image, broken), ParameterError);
}
