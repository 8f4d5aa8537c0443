#include "atomshadow/sensor_sim.hpp"

#include "atomshadow/errors.hpp"
#include "atomshadow/rng.hpp"

#include <cmath>
#include <sstream>

namespace atomshadow {

void require_valid(const SensorModel& model) {
    if (!(model.gain_K > 0.0)) throw ValidationError("sensor gain_K must be > 0");
    if (model.read_sigma < 0.0) throw ValidationError("read_sigma must be >= 0");
    if (!(model.quant_step_q > 0.0)) throw ValidationError("quant_step_q must be > 0");
    if (model.dark_std < 0.0) throw ValidationError("dark_std must be >= 0");
    if (model.dark_mean < 0.0) throw ValidationError("dark_mean must be >= 0");
    if (!(model.clip_max > 0.0)) throw ValidationError("clip_max must be > 0");
}

void require_valid(const CloudModel& cloud) {
    if (!(cloud.sigma_x > 0.0) || !(cloud.sigma_y > 0.0)) {
        throw ValidationError("cloud sigma_x/sigma_y must be > 0");
    }
    if (cloud.amplitude < 0.0) throw ValidationError("cloud amplitude must be >= 0");
    if (!(cloud.baseline_light > 0.0)) {
        throw ValidationError("cloud baseline_light must be > 0");
    }
}

CloudScene render_cloud_scene(const CloudModel& cloud, int width, int height,
                              std::optional<double> pixel_pitch_um) {
    return render_multi_cloud_scene(std::span<const CloudModel>(&cloud, 1), width,
                                    height, pixel_pitch_um);
}

CloudScene render_multi_cloud_scene(std::span<const CloudModel> clouds, int width,
                                    int height,
                                    std::optional<double> pixel_pitch_um) {
    if (clouds.empty()) throw ValidationError("render scene: no clouds given");
    for (const CloudModel& c : clouds) require_valid(c);
    const double baseline = clouds.front().baseline_light;

    CloudScene scene;
    scene.with_atoms = ImageGrid(width, height, 0.0, pixel_pitch_um);
    scene.light_only = ImageGrid(width, height, baseline, pixel_pitch_um);
    for (const CloudModel& c : clouds) {
        const bool inside = c.center_x - 4.0 * c.sigma_x >= 0.0 &&
                            c.center_x + 4.0 * c.sigma_x <= width - 1 &&
                            c.center_y - 4.0 * c.sigma_y >= 0.0 &&
                            c.center_y + 4.0 * c.sigma_y <= height - 1;
        scene.footprint_inside = scene.footprint_inside && inside;
    }

    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double od = 0.0;
            for (const CloudModel& c : clouds) {
                const double dx = (x - c.center_x) / c.sigma_x;
                const double dy = (y - c.center_y) / c.sigma_y;
                od += c.amplitude * std::exp(-0.5 * (dx * dx + dy * dy));
            }
            scene.with_atoms.at(x, y) = baseline * std::exp(-od);
        }
    }
    return scene;
}

namespace {

inline double simulate_pixel(double irr, const SensorModel& model, uint64_t seed,
                             uint64_t index) {
    CounterRng rng(seed, index);
    const double lambda = irr + model.dark_mean;
    const double electrons =
        model.shot_noise ? static_cast<double>(rng.next_poisson(lambda)) : lambda;
    const double analog =
        model.gain_K * electrons + rng.next_normal(model.read_mu, model.read_sigma);
    const double q = model.quant_step_q;
    double counts = std::nearbyint(analog / q) * q;
    if (counts < 0.0) counts = 0.0;
    if (counts > model.clip_max) counts = model.clip_max;
    return counts;
}

void check_irradiation(const ImageGrid& irradiation) {
    require_valid(irradiation, "irradiation");
    for (size_t i = 0; i < irradiation.pixels.size(); ++i) {
        if (irradiation.pixels[i] < 0.0) {
            std::ostringstream msg;
            msg << "irradiation must be non-negative, pixel " << i << " is "
                << irradiation.pixels[i];
            throw ValidationError(msg.str());
        }
    }
}

} // namespace

ImageGrid simulate_frame(const ImageGrid& irradiation, const SensorModel& model,
                         Seed seed) {
    check_irradiation(irradiation);
    require_valid(model);
    ImageGrid frame(irradiation.width, irradiation.height, 0.0,
                    irradiation.pixel_pitch_um);
    const int h = irradiation.height;
    const int w = irradiation.width;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int y = 0; y < h; ++y) {
        const size_t row = static_cast<size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            frame.pixels[row + x] =
                simulate_pixel(irradiation.pixels[row + x], model, seed.value, row + x);
        }
    }
    return frame;
}

namespace serial {

ImageGrid simulate_frame(const ImageGrid& irradiation, const SensorModel& model,
                         Seed seed) {
    check_irradiation(irradiation);
    require_valid(model);
    ImageGrid frame(irradiation.width, irradiation.height, 0.0,
                    irradiation.pixel_pitch_um);
    for (size_t i = 0; i < irradiation.pixels.size(); ++i) {
        frame.pixels[i] = simulate_pixel(irradiation.pixels[i], model, seed.value, i);
    }
    return frame;
}

} // namespace serial

RawTriplet simulate_triplet(const CloudScene& scene, const SensorModel& model,
                            Seed seed) {
    RawTriplet triplet;
    triplet.atoms = simulate_frame(scene.with_atoms, model, Seed{seed.value ^ 1ull});
    triplet.light = simulate_frame(scene.light_only, model, Seed{seed.value ^ 2ull});
    ImageGrid zero(scene.with_atoms.width, scene.with_atoms.height, 0.0,
                   scene.with_atoms.pixel_pitch_um);
    triplet.dark = simulate_frame(zero, model, Seed{seed.value ^ 3ull});
    return triplet;
}

RawTriplet simulate_triplet(const CloudModel& cloud, const SensorModel& model,
                            Seed seed, int width, int height,
                            std::optional<double> pixel_pitch_um) {
    return simulate_triplet(render_cloud_scene(cloud, width, height, pixel_pitch_um),
                            model, seed);
}

void add_fringes(ImageGrid& image, double amplitude, double period_px,
                 double angle_rad, double phase_rad) {
    if (!(period_px > 0.0)) throw ValidationError("fringe period must be > 0");
    const double kx = std::cos(angle_rad) * 2.0 * M_PI / period_px;
    const double ky = std::sin(angle_rad) * 2.0 * M_PI / period_px;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            image.at(x, y) += amplitude * std::sin(kx * x + ky * y + phase_rad);
        }
    }
}

} // namespace atomshadow
