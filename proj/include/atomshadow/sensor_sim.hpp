#pragma once

#include "atomshadow/image.hpp"

#include <cstdint>
#include <optional>

namespace atomshadow {

/// Photosensor description: digital output is
///   D = quantize(K * Poisson(I + dark_mean) + Normal(read_mu, read_sigma), q)
/// clipped to [0, clip_max].
struct SensorModel {
    double gain_K = 1.0;       // system gain, counts per electron
    double dark_mean = 0.0;    // dark-current electrons added to the Poisson mean
    double dark_std = 0.0;     // reserved for a fixed-pattern offset map (off by default)
    double read_mu = 0.0;      // readout-noise mean, counts
    double read_sigma = 0.0;   // readout-noise stddev, counts
    double quant_step_q = 1.0; // ADC step, counts
    double clip_max = 65535.0; // saturation level, counts
    bool shot_noise = true;    // false: electrons = expectation (noise-free sensor)
};

void require_valid(const SensorModel& model);

/// Synthetic Gaussian atom cloud on a uniform probe beam.
struct CloudModel {
    double amplitude = 1.0;       // peak optical density
    double center_x = 150.0;      // pixels
    double center_y = 150.0;      // pixels
    double sigma_x = 10.0;        // pixels
    double sigma_y = 10.0;        // pixels
    double baseline_light = 2000; // probe photoelectrons per pixel
};

void require_valid(const CloudModel& cloud);

struct Seed {
    uint64_t value = 0;
};

/// Expected photoelectron maps for the atoms and light frames.
struct CloudScene {
    ImageGrid with_atoms;
    ImageGrid light_only;
    bool footprint_inside = true; // center +/- 4 sigma fits in the grid
};

/// Transmitted light under the cloud: baseline * exp(-OD(x,y)) with a
/// Gaussian OD profile; the light frame is the flat baseline.
CloudScene render_cloud_scene(const CloudModel& cloud, int width, int height,
                              std::optional<double> pixel_pitch_um = std::nullopt);

/// OD profiles of several clouds add up before the exponential.
CloudScene render_multi_cloud_scene(std::span<const CloudModel> clouds, int width,
                                    int height,
                                    std::optional<double> pixel_pitch_um = std::nullopt);

/// One simulated raw frame for the given expected-photoelectron map.
/// Deterministic in (irradiation, model, seed); parallel over rows.
ImageGrid simulate_frame(const ImageGrid& irradiation, const SensorModel& model,
                         Seed seed);

/// Atoms/light/dark frames with sub-seeds seed^1, seed^2, seed^3.
RawTriplet simulate_triplet(const CloudModel& cloud, const SensorModel& model,
                            Seed seed, int width, int height,
                            std::optional<double> pixel_pitch_um = std::nullopt);

RawTriplet simulate_triplet(const CloudScene& scene, const SensorModel& model,
                            Seed seed);

/// Additive sinusoid, amplitude in the units of the image it is applied to.
/// Test fixture for fringe-robustness checks; not part of the noise model.
void add_fringes(ImageGrid& image, double amplitude, double period_px,
                 double angle_rad, double phase_rad = 0.0);

namespace serial {
/// Reference implementation of simulate_frame without the parallel loop;
/// must produce bit-identical output.
ImageGrid simulate_frame(const ImageGrid& irradiation, const SensorModel& model,
                         Seed seed);
} // namespace serial

} // namespace atomshadow
