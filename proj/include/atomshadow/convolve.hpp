#pragma once

#include "atomshadow/image.hpp"

#include <vector>

namespace atomshadow {

/// Sampled 1-D Gaussian, normalized to unit sum. Support half-width
/// (radius) is ceil(4*sigma), which truncates < 1e-4 of the mass.
struct GaussianKernel {
    double sigma = 0.0;
    int radius = 0;
    std::vector<double> taps; // length 2*radius + 1, symmetric
};

GaussianKernel make_kernel(double sigma);

/// Mirror (reflect-101) index fold: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
int mirror_index(int i, int n);

/// Separable Gaussian blur: row pass then column pass, mirror boundaries.
/// Parallel over rows/columns; output does not depend on the schedule.
ImageGrid convolve_separable(const ImageGrid& image, double sigma);

/// Spatially varying Gaussian blur in gather form: the output pixel is the
/// normalized Gaussian-weighted average of its neighborhood with the kernel
/// width taken from the sigma field at that output pixel.
ImageGrid convolve_varying(const ImageGrid& image, const ImageGrid& sigma_field);

/// Laplacian-of-Gaussian response (direct 2-D convolution with the sampled
/// del^2 G kernel). Used for blob support detection.
ImageGrid log_response(const ImageGrid& image, double sigma);

namespace serial {
ImageGrid convolve_separable(const ImageGrid& image, double sigma);
ImageGrid convolve_varying(const ImageGrid& image, const ImageGrid& sigma_field);
} // namespace serial

} // namespace atomshadow
