#include "atomshadow/segmentation.hpp"

#include "atomshadow/errors.hpp"
#include "atomshadow/rng.hpp"
#include "atomshadow/sensor_sim.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace atomshadow;

namespace {

ImageGrid gaussian_od(int size, double cx, double cy, double sigma, double amplitude,
                      double offset = 0.0) {
    ImageGrid od(size, size, 0.0);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double dx = (x - cx) / sigma;
            const double dy = (y - cy) / sigma;
            od.at(x, y) = offset + amplitude * std::exp(-0.5 * (dx * dx + dy * dy));
        }
    }
    return od;
}

} // namespace

TEST_CASE("find_center locates a noiseless cloud to sub-pixel accuracy") {
    const ImageGrid od = gaussian_od(301, 150.0, 150.0, 12.0, 1.0);
    const Center c = find_center(od);
    CHECK(std::fabs(c.x - 150.0) < 0.5);
    CHECK(std::fabs(c.y - 150.0) < 0.5);
}

TEST_CASE("find_center follows translations") {
    const ImageGrid base = gaussian_od(301, 150.0, 150.0, 12.0, 1.0);
    const ImageGrid moved = gaussian_od(301, 157.0, 146.0, 12.0, 1.0);
    const Center a = find_center(base);
    const Center b = find_center(moved);
    CHECK(std::fabs((b.x - a.x) - 7.0) < 0.5);
    CHECK(std::fabs((b.y - a.y) - (-4.0)) < 0.5);
}

TEST_CASE("two mirror-symmetric clouds center on the symmetry axis") {
    ImageGrid od(201, 201, 0.0);
    for (int y = 0; y < 201; ++y) {
        for (int x = 0; x < 201; ++x) {
            const double left = std::exp(-0.5 * ((x - 70.0) * (x - 70.0) +
                                                 (y - 100.0) * (y - 100.0)) /
                                         64.0);
            const double right = std::exp(-0.5 * ((x - 130.0) * (x - 130.0) +
                                                  (y - 100.0) * (y - 100.0)) /
                                          64.0);
            od.at(x, y) = left + right;
        }
    }
    const Center c = find_center(od);
    CHECK(std::fabs(c.x - 100.0) < 0.5);
    CHECK(std::fabs(c.y - 100.0) < 0.5);
}

TEST_CASE("find_center rejects constant images") {
    ImageGrid flat(64, 64, 0.25);
    CHECK_THROWS_AS(find_center(flat), ValidationError);
}

TEST_CASE("component detection separates two distinct clouds") {
    ImageGrid od(201, 201, 0.0);
    for (int y = 0; y < 201; ++y) {
        for (int x = 0; x < 201; ++x) {
            const double a = 1.0 * std::exp(-0.5 * ((x - 60.0) * (x - 60.0) +
                                                    (y - 60.0) * (y - 60.0)) /
                                            36.0);
            const double b = 0.7 * std::exp(-0.5 * ((x - 145.0) * (x - 145.0) +
                                                    (y - 140.0) * (y - 140.0)) /
                                            49.0);
            od.at(x, y) = a + b;
        }
    }
    const std::vector<Component> components = detect_components(od);
    REQUIRE(components.size() >= 2);
    CHECK(std::fabs(components[0].centroid_x - 60.0) < 1.0);
    CHECK(std::fabs(components[0].centroid_y - 60.0) < 1.0);
    CHECK(std::fabs(components[1].centroid_x - 145.0) < 1.0);
    CHECK(std::fabs(components[1].centroid_y - 140.0) < 1.0);
    CHECK(components[0].mass > components[1].mass);
}

TEST_CASE("crop_centered extracts the documented window") {
    ImageGrid image(301, 301, 0.0);
    for (int y = 0; y < 301; ++y) {
        for (int x = 0; x < 301; ++x) image.at(x, y) = x * 1000.0 + y;
    }
    const ImageGrid crop = crop_centered(image, {150.0, 150.0}, 101);
    CHECK(crop.width == 101);
    CHECK(crop.height == 101);
    CHECK(crop.at(0, 0) == image.at(100, 100));
    CHECK(crop.at(100, 100) == image.at(200, 200));
    CHECK(crop.at(50, 50) == image.at(150, 150));

    const ImageGrid single = crop_centered(image, {150.4, 149.6}, 1);
    CHECK(single.width == 1);
    CHECK(single.at(0, 0) == image.at(150, 150));
}

TEST_CASE("crop_centered mirror-pads at the corner") {
    ImageGrid image(10, 10, 0.0);
    for (int y = 0; y < 10; ++y) {
        for (int x = 0; x < 10; ++x) image.at(x, y) = x * 100.0 + y;
    }
    const ImageGrid crop = crop_centered(image, {0.0, 0.0}, 5);
    // reflect-101: offsets -2,-1 fold onto +2,+1
    CHECK(crop.at(2, 2) == image.at(0, 0));
    CHECK(crop.at(0, 2) == image.at(2, 0));
    CHECK(crop.at(1, 2) == image.at(1, 0));
    CHECK(crop.at(2, 0) == image.at(0, 2));
    CHECK(crop.at(0, 0) == image.at(2, 2));
}

TEST_CASE("crop_centered validates the width") {
    ImageGrid image(50, 40, 1.0);
    CHECK_THROWS_AS(crop_centered(image, {25.0, 20.0}, 100), ValidationError);
    CHECK_THROWS_AS(crop_centered(image, {25.0, 20.0}, 10), ValidationError); // even
    CHECK_NOTHROW(crop_centered(image, {25.0, 20.0}, 79));
}

TEST_CASE("radius factors invert the Gaussian at the 15% and 1% levels") {
    CHECK(radius_factor(0.15) == doctest::Approx(1.94787).epsilon(1e-5));
    CHECK(radius_factor(0.01) == doctest::Approx(3.03485).epsilon(1e-5));
}

TEST_CASE("segmentation of an exact Gaussian matches the analytic radii") {
    const ImageGrid crop = gaussian_od(101, 50.0, 50.0, 10.0, 1.0, 0.02);
    const Segmentation seg = segment(crop);
    CHECK(seg.fit.converged);
    CHECK(seg.fit.sigma == doctest::Approx(10.0).epsilon(1e-4));
    CHECK(seg.r_s == doctest::Approx(19.479).epsilon(1e-3));
    CHECK(seg.r_e == doctest::Approx(30.349).epsilon(1e-3));
    CHECK(seg.r_m == doctest::Approx(24.914).epsilon(1e-3));
    CHECK(seg.center_x == doctest::Approx(50.0).epsilon(1e-4));
    CHECK(seg.center_y == doctest::Approx(50.0).epsilon(1e-4));
    CHECK(seg.r_s < seg.r_m);
    CHECK(seg.r_m < seg.r_e);

    // The masks partition the crop.
    CHECK(seg.mask_J.size() + seg.mask_L.size() + seg.mask_K.size() == 101u * 101u);
    std::vector<size_t> all;
    all.insert(all.end(), seg.mask_J.begin(), seg.mask_J.end());
    all.insert(all.end(), seg.mask_L.begin(), seg.mask_L.end());
    all.insert(all.end(), seg.mask_K.begin(), seg.mask_K.end());
    std::sort(all.begin(), all.end());
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
}

TEST_CASE("segmentation radii scale with the fitted width") {
    const Segmentation narrow = segment(gaussian_od(101, 50.0, 50.0, 6.0, 1.0));
    const Segmentation wide = segment(gaussian_od(101, 50.0, 50.0, 12.0, 1.0));
    CHECK(wide.r_s == doctest::Approx(2.0 * narrow.r_s).epsilon(1e-3));
    CHECK(wide.r_e == doctest::Approx(2.0 * narrow.r_e).epsilon(1e-3));
}

TEST_CASE("segmentation refuses noise-only crops") {
    CounterRng rng(17, 17);
    ImageGrid noise(101, 101, 0.0);
    for (double& v : noise.pixels) v = rng.next_normal(0.1, 0.03);
    CHECK_THROWS_AS(segment(noise), SegmentationError);
}
