#include "atomshadow/metrics.hpp"

#include "atomshadow/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace atomshadow {

namespace {

constexpr double kFwhmFactor = 2.3548200450309493820231386; // 2 sqrt(2 ln 2)
constexpr int kMaxIterations = 200;
constexpr double kStepTolerance = 1e-10;

struct Params {
    double amplitude, center, sigma, offset;
};

double sum_squared_residuals(std::span<const ProfilePoint> pts, const Params& p) {
    double sse = 0.0;
    for (const ProfilePoint& pt : pts) {
        const double z = (pt.position - p.center) / p.sigma;
        const double model = p.amplitude * std::exp(-0.5 * z * z) + p.offset;
        const double r = pt.value - model;
        sse += r * r;
    }
    return sse;
}

// Solve a 4x4 linear system in place; returns false when singular.
bool solve4(std::array<std::array<double, 5>, 4>& m, std::array<double, 4>& x) {
    for (int col = 0; col < 4; ++col) {
        int pivot = col;
        for (int row = col + 1; row < 4; ++row) {
            if (std::fabs(m[row][col]) > std::fabs(m[pivot][col])) pivot = row;
        }
        if (std::fabs(m[pivot][col]) < 1e-300) return false;
        std::swap(m[col], m[pivot]);
        for (int row = col + 1; row < 4; ++row) {
            const double f = m[row][col] / m[col][col];
            for (int k = col; k < 5; ++k) m[row][k] -= f * m[col][k];
        }
    }
    for (int row = 3; row >= 0; --row) {
        double acc = m[row][4];
        for (int k = row + 1; k < 4; ++k) acc -= m[row][k] * x[k];
        x[row] = acc / m[row][row];
    }
    return true;
}

Params initial_guess(std::span<const ProfilePoint> pts) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    size_t argmax = 0;
    for (size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].value < lo) lo = pts[i].value;
        if (pts[i].value > hi) {
            hi = pts[i].value;
            argmax = i;
        }
    }
    Params p;
    p.offset = lo;
    p.amplitude = hi - lo;
    p.center = pts[argmax].position;

    // Half width at half maximum, scanned outward from the peak.
    const double half = lo + 0.5 * (hi - lo);
    double left = pts.front().position;
    double right = pts.back().position;
    for (size_t i = argmax; i-- > 0;) {
        if (pts[i].value < half) {
            left = pts[i].position;
            break;
        }
    }
    for (size_t i = argmax + 1; i < pts.size(); ++i) {
        if (pts[i].value < half) {
            right = pts[i].position;
            break;
        }
    }
    const double hwhm = 0.5 * (right - left);
    const double span = std::fabs(pts.back().position - pts.front().position);
    p.sigma = hwhm > 0.0 ? hwhm / std::sqrt(2.0 * std::log(2.0)) : span / 6.0;
    if (!(p.sigma > 0.0)) p.sigma = 1.0;
    return p;
}

} // namespace

GaussFit1D fit_gaussian_1d(std::span<const ProfilePoint> profile) {
    if (profile.size() < 5) {
        throw ValidationError("fit_gaussian_1d needs at least 5 points");
    }
    bool all_equal = true;
    for (size_t i = 1; i < profile.size(); ++i) {
        if (profile[i].value != profile[0].value) {
            all_equal = false;
            break;
        }
    }
    if (all_equal) {
        throw ValidationError("fit_gaussian_1d: flat profile has no peak");
    }

    Params p = initial_guess(profile);
    double sse = sum_squared_residuals(profile, p);
    double lambda = 1e-3;
    GaussFit1D fit;

    // Step-size floors so parameters converging to zero (typically the
    // offset) still register as converged. Derived from the initial guess,
    // which keeps the criterion scale- and translation-equivariant.
    const std::array<double, 4> scale_floor = {
        1e-3 * std::fabs(p.amplitude) + 1e-30, 1e-3 * p.sigma,
        1e-3 * p.sigma, 1e-3 * std::fabs(p.amplitude) + 1e-30};
    auto step_is_tiny = [&](const std::array<double, 4>& delta,
                            const Params& at) {
        const std::array<double, 4> current = {at.amplitude, at.center, at.sigma,
                                               at.offset};
        for (int a = 0; a < 4; ++a) {
            if (std::fabs(delta[a]) >=
                kStepTolerance * (std::fabs(current[a]) + scale_floor[a])) {
                return false;
            }
        }
        return true;
    };

    for (int iter = 0; iter < kMaxIterations; ++iter) {
        fit.iterations = iter + 1;
        // Normal equations JtJ delta = Jt r with analytic Jacobian.
        std::array<std::array<double, 5>, 4> m{};
        for (const ProfilePoint& pt : profile) {
            const double d = pt.position - p.center;
            const double z = d / p.sigma;
            const double e = std::exp(-0.5 * z * z);
            const double model = p.amplitude * e + p.offset;
            const double r = pt.value - model;
            const std::array<double, 4> j = {
                e,                                          // d/d amplitude
                p.amplitude * e * d / (p.sigma * p.sigma),  // d/d center
                p.amplitude * e * d * d /
                    (p.sigma * p.sigma * p.sigma),          // d/d sigma
                1.0,                                        // d/d offset
            };
            for (int a = 0; a < 4; ++a) {
                for (int b = 0; b < 4; ++b) m[a][b] += j[a] * j[b];
                m[a][4] += j[a] * r;
            }
        }

        // Marquardt scaling keeps the iteration equivariant under value
        // rescaling, which the fit contract requires.
        std::array<std::array<double, 5>, 4> damped = m;
        for (int a = 0; a < 4; ++a) damped[a][a] += lambda * std::max(m[a][a], 1e-300);
        std::array<double, 4> delta{};
        if (!solve4(damped, delta)) break;

        if (step_is_tiny(delta, p)) { // gradient has vanished
            fit.converged = true;
            break;
        }

        Params trial = p;
        trial.amplitude += delta[0];
        trial.center += delta[1];
        trial.sigma += delta[2];
        trial.offset += delta[3];

        const double trial_sse =
            trial.sigma > 0.0 ? sum_squared_residuals(profile, trial)
                              : std::numeric_limits<double>::infinity();
        if (trial_sse <= sse) {
            p = trial;
            sse = trial_sse;
            lambda = std::max(lambda * 0.3, 1e-12);
            if (step_is_tiny(delta, p)) {
                fit.converged = true;
                break;
            }
        } else {
            lambda *= 4.0;
            if (lambda > 1e12) break;
        }
    }

    fit.amplitude = p.amplitude;
    fit.center = p.center;
    fit.sigma = p.sigma;
    fit.offset = p.offset;
    fit.residual_rms = std::sqrt(sse / static_cast<double>(profile.size()));
    if (!(fit.sigma > 0.0)) fit.converged = false;
    return fit;
}

GaussFit1D fit_gaussian_1d(std::span<const double> values) {
    std::vector<ProfilePoint> pts(values.size());
    for (size_t i = 0; i < values.size(); ++i) {
        pts[i] = {static_cast<double>(i), values[i]};
    }
    return fit_gaussian_1d(pts);
}

double fwhm_from_sigma(double sigma) {
    if (!(sigma > 0.0)) throw ValidationError("fwhm_from_sigma: sigma must be > 0");
    return kFwhmFactor * sigma;
}

double sigma_from_fwhm(double fwhm) {
    if (!(fwhm > 0.0)) throw ValidationError("sigma_from_fwhm: fwhm must be > 0");
    return fwhm / kFwhmFactor;
}

void require_valid(const PhysicalContext& ctx) {
    if (!(ctx.atom_mass_kg > 0.0) || !(ctx.boltzmann_J_per_K > 0.0) ||
        !(ctx.tof_time_s > 0.0) || !(ctx.pixel_pitch_m > 0.0) ||
        !(ctx.cross_section_m2 > 0.0)) {
        throw ValidationError("physical context fields must be strictly positive");
    }
}

double temperature_from_sigma(double sigma_m, const PhysicalContext& ctx) {
    require_valid(ctx);
    if (!(sigma_m > 0.0)) throw ValidationError("temperature: sigma must be > 0");
    return ctx.atom_mass_kg * sigma_m * sigma_m /
           (2.0 * ctx.boltzmann_J_per_K * ctx.tof_time_s * ctx.tof_time_s);
}

double temperature_from_fwhm(double fwhm_m, const PhysicalContext& ctx) {
    require_valid(ctx);
    if (!(fwhm_m > 0.0)) throw ValidationError("temperature: fwhm must be > 0");
    return ctx.atom_mass_kg * fwhm_m * fwhm_m /
           (16.0 * std::log(2.0) * ctx.boltzmann_J_per_K * ctx.tof_time_s *
            ctx.tof_time_s);
}

double temperature_from_expansion(std::span<const std::pair<double, double>> tof_fwhm_m,
                                  const PhysicalContext& ctx) {
    require_valid(ctx);
    if (tof_fwhm_m.size() < 2) {
        throw ValidationError("expansion fit needs at least 2 delay points");
    }
    // Least squares through (t^2, FWHM^2).
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(tof_fwhm_m.size());
    for (const auto& [t, fwhm] : tof_fwhm_m) {
        const double x = t * t;
        const double y = fwhm * fwhm;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = n * sxx - sx * sx;
    if (std::fabs(denom) < 1e-300) {
        throw ValidationError("expansion fit: delays are degenerate");
    }
    const double slope = (n * sxy - sx * sy) / denom; // d FWHM^2 / d t^2
    if (!(slope > 0.0)) {
        throw ValidationError("expansion fit: non-positive FWHM^2 slope");
    }
    return ctx.atom_mass_kg * slope / (16.0 * std::log(2.0) * ctx.boltzmann_J_per_K);
}

double particle_number(const ImageGrid& od, const PhysicalContext& ctx,
                       std::span<const size_t> mask) {
    require_valid(ctx);
    require_valid(od, "particle_number input");
    double sum = 0.0;
    if (mask.empty()) {
        for (double v : od.pixels) sum += v;
    } else {
        for (size_t idx : mask) {
            if (idx >= od.pixels.size()) {
                throw ValidationError("particle_number: mask index out of bounds");
            }
            sum += od.pixels[idx];
        }
    }
    const double pitch2 = ctx.pixel_pitch_m * ctx.pixel_pitch_m;
    return pitch2 / ctx.cross_section_m2 * sum;
}

SeriesStats shot_series_stats(std::span<const double> values) {
    if (values.size() < 2) {
        throw ValidationError("shot_series_stats needs at least 2 shots");
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) {
        const double d = v - mean;
        sq += d * d;
    }
    SeriesStats stats;
    stats.mean = mean;
    stats.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
    return stats;
}

} // namespace atomshadow
