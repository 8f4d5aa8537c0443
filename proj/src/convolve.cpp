#include "atomshadow/convolve.hpp"

#include "atomshadow/errors.hpp"

#include <cmath>
#include <sstream>

namespace atomshadow {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
}

GaussianKernel make_kernel(double sigma) {
    if (!(sigma > 0.0)) {
        std::ostringstream msg;
        msg << "kernel sigma must be > 0, got " << sigma;
        throw ValidationError(msg.str());
    }
    GaussianKernel kernel;
    kernel.sigma = sigma;
    kernel.radius = static_cast<int>(std::ceil(4.0 * sigma));
    kernel.taps.resize(2 * kernel.radius + 1);
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    const double amp = kInvSqrt2Pi / sigma;
    for (int k = -kernel.radius; k <= kernel.radius; ++k) {
        kernel.taps[k + kernel.radius] = amp * std::exp(-k * k * inv2s2);
    }
    double sum = 0.0;
    for (double t : kernel.taps) sum += t;
    for (double& t : kernel.taps) t /= sum;
    return kernel;
}

int mirror_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    int m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - m;
}

namespace {

// Row pass: each output row depends only on the matching input row.
void row_pass(const ImageGrid& src, const GaussianKernel& kernel, ImageGrid& dst,
              bool parallel) {
    const int w = src.width;
    const int h = src.height;
    const int r = kernel.radius;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#else
    (void)parallel;
#endif
    for (int y = 0; y < h; ++y) {
        const double* in = &src.pixels[static_cast<size_t>(y) * w];
        double* out = &dst.pixels[static_cast<size_t>(y) * w];
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                acc += kernel.taps[k + r] * in[mirror_index(x + k, w)];
            }
            out[x] = acc;
        }
    }
}

void col_pass(const ImageGrid& src, const GaussianKernel& kernel, ImageGrid& dst,
              bool parallel) {
    const int w = src.width;
    const int h = src.height;
    const int r = kernel.radius;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#else
    (void)parallel;
#endif
    for (int y = 0; y < h; ++y) {
        double* out = &dst.pixels[static_cast<size_t>(y) * w];
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                acc += kernel.taps[k + r] * src.at(x, mirror_index(y + k, h));
            }
            out[x] = acc;
        }
    }
}

ImageGrid separable_impl(const ImageGrid& image, double sigma, bool parallel) {
    require_valid(image, "convolve input");
    const GaussianKernel kernel = make_kernel(sigma);
    ImageGrid tmp(image.width, image.height, 0.0, image.pixel_pitch_um);
    ImageGrid out(image.width, image.height, 0.0, image.pixel_pitch_um);
    row_pass(image, kernel, tmp, parallel);
    col_pass(tmp, kernel, out, parallel);
    return out;
}

ImageGrid varying_impl(const ImageGrid& image, const ImageGrid& field, bool parallel) {
    require_valid(image, "convolve input");
    require_valid(field, "sigma field");
    if (!image.congruent_with(field)) {
        throw ValidationError("sigma field size differs from image size");
    }
    for (double s : field.pixels) {
        if (!(s > 0.0)) throw ValidationError("sigma field must be positive everywhere");
    }
    const int w = image.width;
    const int h = image.height;
    ImageGrid out(w, h, 0.0, image.pixel_pitch_um);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#else
    (void)parallel;
#endif
    for (int y = 0; y < h; ++y) {
        std::vector<double> taps;
        for (int x = 0; x < w; ++x) {
            const double sigma = field.at(x, y);
            const int r = static_cast<int>(std::ceil(4.0 * sigma));
            const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
            taps.resize(2 * r + 1);
            for (int k = -r; k <= r; ++k) taps[k + r] = std::exp(-k * k * inv2s2);

            double acc = 0.0;
            double weight = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
                const double* in = &image.pixels[static_cast<size_t>(mirror_index(y + dy, h)) * w];
                const double wy = taps[dy + r];
                double row_acc = 0.0;
                double row_weight = 0.0;
                for (int dx = -r; dx <= r; ++dx) {
                    const double wx = taps[dx + r];
                    row_acc += wx * in[mirror_index(x + dx, w)];
                    row_weight += wx;
                }
                acc += wy * row_acc;
                weight += wy * row_weight;
            }
            out.at(x, y) = acc / weight;
        }
    }
    return out;
}

} // namespace

ImageGrid convolve_separable(const ImageGrid& image, double sigma) {
    return separable_impl(image, sigma, true);
}

ImageGrid convolve_varying(const ImageGrid& image, const ImageGrid& sigma_field) {
    return varying_impl(image, sigma_field, true);
}

namespace serial {

ImageGrid convolve_separable(const ImageGrid& image, double sigma) {
    return separable_impl(image, sigma, false);
}

ImageGrid convolve_varying(const ImageGrid& image, const ImageGrid& sigma_field) {
    return varying_impl(image, sigma_field, false);
}

} // namespace serial

ImageGrid log_response(const ImageGrid& image, double sigma) {
    require_valid(image, "log_response input");
    if (!(sigma > 0.0)) throw ValidationError("log sigma must be > 0");
    const int r = static_cast<int>(std::ceil(4.0 * sigma));
    const int n = 2 * r + 1;
    std::vector<double> taps(static_cast<size_t>(n) * n);
    const double s2 = sigma * sigma;
    const double norm = 1.0 / (2.0 * M_PI * s2);
    double sum = 0.0;
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            const double r2 = static_cast<double>(dx * dx + dy * dy);
            const double g = norm * std::exp(-r2 / (2.0 * s2));
            const double v = (r2 - 2.0 * s2) / (s2 * s2) * g;
            taps[static_cast<size_t>(dy + r) * n + (dx + r)] = v;
            sum += v;
        }
    }
    // Remove the truncation-induced DC term so flat regions respond with 0.
    const double mean = sum / static_cast<double>(n) / static_cast<double>(n);
    for (double& t : taps) t -= mean;

    const int w = image.width;
    const int h = image.height;
    ImageGrid out(w, h, 0.0, image.pixel_pitch_um);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
                const double* in = &image.pixels[static_cast<size_t>(mirror_index(y + dy, h)) * w];
                const double* tap_row = &taps[static_cast<size_t>(dy + r) * n];
                for (int dx = -r; dx <= r; ++dx) {
                    acc += tap_row[dx + r] * in[mirror_index(x + dx, w)];
                }
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

} // namespace atomshadow
