#pragma once

#include "atomshadow/image.hpp"

#include <utility>
#include <vector>

namespace atomshadow {

/// Configuration for the minimum-description-length width search. The
/// trade-off constant is c = 4.0e-3 * l^2 with l the mesh edge (1 pixel),
/// and candidate widths form a geometric grid.
struct MdlConfig {
    double mesh_edge_l = 1.0;
    double sigma_min = 0.3;
    double sigma_max = 10.0;
    int sigma_points = 60;
    int residual_window = 5; // odd window side for the local residual

    double coefficient_c() const { return 4.0e-3 * mesh_edge_l * mesh_edge_l; }
    std::vector<double> sigma_grid() const;
};

void require_valid(const MdlConfig& cfg);

/// All smoothings of one image over the sigma grid, computed once and
/// shared between the per-pixel searches.
struct SmoothedStack {
    std::vector<double> sigmas;
    std::vector<ImageGrid> smoothed;
};

SmoothedStack make_smoothed_stack(const ImageGrid& image, const MdlConfig& cfg);

/// MDL objective c/sigma^2 + mean squared residual (original - smoothed)
/// over the residual window centered at (x, y). Expects a [0,1] image.
double mdl_objective(const ImageGrid& image, int x, int y, double sigma,
                     const MdlConfig& cfg);

/// Exact argmin of mdl_objective over the sigma grid; ties go to the
/// smaller sigma.
double mdl_best_sigma(const ImageGrid& image, int x, int y, const MdlConfig& cfg);

/// Per-pixel best sigma for every row-major index in `pixels`, sharing one
/// smoothed stack. Equals calling mdl_best_sigma per pixel, exactly.
std::vector<double> mdl_best_sigma_map(const ImageGrid& image,
                                       std::span<const size_t> pixels,
                                       const MdlConfig& cfg);

/// Same, reusing an already computed stack of the same image.
std::vector<double> mdl_best_sigma_map(const ImageGrid& image,
                                       const SmoothedStack& stack,
                                       std::span<const size_t> pixels,
                                       const MdlConfig& cfg);

namespace serial {
std::vector<double> mdl_best_sigma_map(const ImageGrid& image,
                                       std::span<const size_t> pixels,
                                       const MdlConfig& cfg);
} // namespace serial

} // namespace atomshadow
