#pragma once

#include "atomshadow/image.hpp"

#include <span>
#include <utility>
#include <vector>

namespace atomshadow {

/// Result of fitting value = amplitude * exp(-(pos-center)^2 / (2 sigma^2)) + offset.
struct GaussFit1D {
    double amplitude = 0.0;
    double center = 0.0;
    double sigma = 0.0;
    double offset = 0.0;
    double residual_rms = 0.0;
    bool converged = false;
    int iterations = 0;
};

struct ProfilePoint {
    double position = 0.0;
    double value = 0.0;
};

/// Damped (Levenberg-style) nonlinear least squares with analytic Jacobian.
/// Convergence: relative parameter step < 1e-10, at most 200 iterations.
/// Never throws on non-convergence; converged=false with the best parameters.
GaussFit1D fit_gaussian_1d(std::span<const ProfilePoint> profile);

GaussFit1D fit_gaussian_1d(std::span<const double> values);

double fwhm_from_sigma(double sigma);
double sigma_from_fwhm(double fwhm);

/// Physical constants and experiment parameters for thermometry and counting.
struct PhysicalContext {
    double atom_mass_kg = 1.44316e-25;      // 87Rb
    double boltzmann_J_per_K = 1.380649e-23;
    double tof_time_s = 0.02;
    double pixel_pitch_m = 5.0e-6;
    double cross_section_m2 = 2.907e-13;    // resonant D2 cross-section of 87Rb
};

void require_valid(const PhysicalContext& ctx);

/// T = m sigma^2 / (2 k_B t^2), sigma in meters.
double temperature_from_sigma(double sigma_m, const PhysicalContext& ctx);

/// T = m FWHM^2 / (16 ln2 k_B t^2), FWHM in meters.
double temperature_from_fwhm(double fwhm_m, const PhysicalContext& ctx);

/// Slope thermometry over a ballistic-expansion series: least-squares line
/// through (t^2, FWHM^2); the slope feeds the same convention as
/// temperature_from_fwhm, so the in-trap size drops out as the intercept.
double temperature_from_expansion(std::span<const std::pair<double, double>> tof_fwhm_m,
                                  const PhysicalContext& ctx);

/// Atom count N = (pitch^2 / cross_section) * sum of OD over the mask
/// (all pixels when mask is empty). Negative OD pixels enter as-is.
double particle_number(const ImageGrid& od, const PhysicalContext& ctx,
                       std::span<const size_t> mask = {});

struct ShotMetrics {
    double fwhm_px = 0.0;
    double fwhm_m = 0.0;        // 0 when the pixel pitch is unknown
    double temperature_K = 0.0; // 0 when pitch or TOF is unavailable
    double atom_number_raw = 0.0;
    double atom_number_enhanced = 0.0;
};

struct SeriesStats {
    double mean = 0.0;
    double stddev = 0.0; // sample convention (n - 1)
};

/// Per-quantity mean and sample stddev across repeated shots.
SeriesStats shot_series_stats(std::span<const double> values);

} // namespace atomshadow
