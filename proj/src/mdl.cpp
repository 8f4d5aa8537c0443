#include "atomshadow/mdl.hpp"

#include "atomshadow/convolve.hpp"
#include "atomshadow/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace atomshadow {

std::vector<double> MdlConfig::sigma_grid() const {
    std::vector<double> grid(static_cast<size_t>(sigma_points));
    if (sigma_points == 1) {
        grid[0] = sigma_min;
        return grid;
    }
    const double ratio = std::log(sigma_max / sigma_min) / (sigma_points - 1);
    for (int i = 0; i < sigma_points; ++i) {
        grid[static_cast<size_t>(i)] = sigma_min * std::exp(ratio * i);
    }
    grid.back() = sigma_max;
    return grid;
}

void require_valid(const MdlConfig& cfg) {
    if (!(cfg.mesh_edge_l > 0.0)) throw ValidationError("mdl mesh_edge_l must be > 0");
    if (!(cfg.sigma_min > 0.0) || !(cfg.sigma_max > cfg.sigma_min)) {
        throw ValidationError("mdl sigma grid bounds must satisfy 0 < min < max");
    }
    if (cfg.sigma_points < 1) throw ValidationError("mdl sigma_points must be >= 1");
    if (cfg.residual_window < 1 || cfg.residual_window % 2 == 0) {
        throw ValidationError("mdl residual_window must be odd and >= 1");
    }
}

namespace {

// Local mean squared residual between the image and one smoothing, over the
// residual window centered at (x, y); mirror handling at the borders.
double window_residual(const ImageGrid& image, const ImageGrid& smoothed, int x, int y,
                       int window) {
    const int half = window / 2;
    double acc = 0.0;
    for (int dy = -half; dy <= half; ++dy) {
        const int yy = mirror_index(y + dy, image.height);
        for (int dx = -half; dx <= half; ++dx) {
            const int xx = mirror_index(x + dx, image.width);
            const double e = image.at(xx, yy) - smoothed.at(xx, yy);
            acc += e * e;
        }
    }
    return acc / (static_cast<double>(window) * window);
}

size_t argmin_over_stack(const ImageGrid& image, const SmoothedStack& stack, int x,
                         int y, const MdlConfig& cfg) {
    const double c = cfg.coefficient_c();
    size_t best = 0;
    double best_value = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < stack.sigmas.size(); ++i) {
        const double s = stack.sigmas[i];
        const double value =
            c / (s * s) +
            window_residual(image, stack.smoothed[i], x, y, cfg.residual_window);
        if (value < best_value) { // strict: ties keep the smaller sigma
            best_value = value;
            best = i;
        }
    }
    return best;
}

void check_center(const ImageGrid& image, int x, int y) {
    if (!image.in_bounds(x, y)) {
        std::ostringstream msg;
        msg << "mdl window center (" << x << "," << y << ") outside " << image.width
            << "x" << image.height << " grid";
        throw ValidationError(msg.str());
    }
}

} // namespace

SmoothedStack make_smoothed_stack(const ImageGrid& image, const MdlConfig& cfg) {
    require_valid(cfg);
    require_valid(image, "mdl input");
    SmoothedStack stack;
    stack.sigmas = cfg.sigma_grid();
    stack.smoothed.reserve(stack.sigmas.size());
    for (double s : stack.sigmas) {
        stack.smoothed.push_back(convolve_separable(image, s));
    }
    return stack;
}

double mdl_objective(const ImageGrid& image, int x, int y, double sigma,
                     const MdlConfig& cfg) {
    require_valid(cfg);
    require_valid(image, "mdl input");
    check_center(image, x, y);
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ValidationError("mdl_objective: sigma must be finite and > 0");
    }
    const ImageGrid smoothed = convolve_separable(image, sigma);
    const double c = cfg.coefficient_c();
    return c / (sigma * sigma) +
           window_residual(image, smoothed, x, y, cfg.residual_window);
}

double mdl_best_sigma(const ImageGrid& image, int x, int y, const MdlConfig& cfg) {
    const SmoothedStack stack = make_smoothed_stack(image, cfg);
    check_center(image, x, y);
    return stack.sigmas[argmin_over_stack(image, stack, x, y, cfg)];
}

namespace {

std::vector<double> best_sigma_map_impl(const ImageGrid& image,
                                        const SmoothedStack& stack,
                                        std::span<const size_t> pixels,
                                        const MdlConfig& cfg, bool parallel) {
    for (size_t idx : pixels) {
        if (idx >= image.pixels.size()) {
            throw ValidationError("mdl map: pixel index out of bounds");
        }
    }
    std::vector<double> best(pixels.size());
    const long n = static_cast<long>(pixels.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#else
    (void)parallel;
#endif
    for (long i = 0; i < n; ++i) {
        const size_t idx = pixels[static_cast<size_t>(i)];
        const int x = static_cast<int>(idx % image.width);
        const int y = static_cast<int>(idx / image.width);
        best[static_cast<size_t>(i)] =
            stack.sigmas[argmin_over_stack(image, stack, x, y, cfg)];
    }
    return best;
}

} // namespace

std::vector<double> mdl_best_sigma_map(const ImageGrid& image,
                                       std::span<const size_t> pixels,
                                       const MdlConfig& cfg) {
    return best_sigma_map_impl(image, make_smoothed_stack(image, cfg), pixels, cfg,
                               true);
}

std::vector<double> mdl_best_sigma_map(const ImageGrid& image,
                                       const SmoothedStack& stack,
                                       std::span<const size_t> pixels,
                                       const MdlConfig& cfg) {
    return best_sigma_map_impl(image, stack, pixels, cfg, true);
}

namespace serial {

std::vector<double> mdl_best_sigma_map(const ImageGrid& image,
                                       std::span<const size_t> pixels,
                                       const MdlConfig& cfg) {
    return best_sigma_map_impl(image, make_smoothed_stack(image, cfg), pixels, cfg,
                               false);
}

} // namespace serial

} // namespace atomshadow
