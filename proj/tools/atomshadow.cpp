// atomshadow: absorption-image enhancement pipeline.
//
// Subcommands: od, enhance, simulate, campaign, metrics. Configuration is a
// JSON document (--config) whose keys map one-to-one onto CLI flags; flags
// override file values. ATOMSHADOW_SEED overrides the configured seed.

#include "atomshadow/enhance.hpp"
#include "atomshadow/errors.hpp"
#include "atomshadow/image_io.hpp"
#include "atomshadow/metrics.hpp"
#include "atomshadow/rng.hpp"
#include "atomshadow/sensor_sim.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace atomshadow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitInternal = 3;
constexpr int kExitSegmentation = 4;

// ------------------------------------------------------------------ config

struct CampaignConfig {
    double temperature_nK = 150.0;
    double sigma0_px = 8.0;
    std::vector<double> delays_ms = {4.0, 6.0, 8.0, 10.0, 12.0};
    int shots = 10;
};

struct RunConfig {
    uint64_t seed = 12345;
    std::string output_dir = "out";
    std::string output_format = "f32"; // f32 | png | tiff
    int crop_width = 101;
    double clamp_floor = 1e-6;
    double log_sigma = 3.0;
    double kappa = 0.5;
    int jobs = 0;
    MdlConfig mdl;
    CalibrationThresholds thresholds;
    struct {
        double atom_mass_kg = 1.44316e-25;
        double boltzmann_J_per_K = 1.380649e-23;
        double tof_s = 0.02;
        double pixel_pitch_um = 5.0;
        double cross_section_um2 = 0.2907;
    } physics;
    SensorModel sensor;
    CloudModel cloud;
    struct {
        int width = 301;
        int height = 301;
    } sim;
    CampaignConfig campaign;

    PhysicalContext physical_context() const {
        PhysicalContext ctx;
        ctx.atom_mass_kg = physics.atom_mass_kg;
        ctx.boltzmann_J_per_K = physics.boltzmann_J_per_K;
        ctx.tof_time_s = physics.tof_s;
        ctx.pixel_pitch_m = physics.pixel_pitch_um * 1e-6;
        ctx.cross_section_m2 = physics.cross_section_um2 * 1e-12;
        return ctx;
    }

    EnhanceConfig enhance_config() const {
        EnhanceConfig cfg;
        cfg.filter.mdl = mdl;
        cfg.filter.thresholds = thresholds;
        cfg.filter.crop_width = crop_width;
        cfg.filter.log_sigma = log_sigma;
        cfg.kappa = kappa;
        return cfg;
    }

    ImageFormat image_format() const {
        if (output_format == "f32") return ImageFormat::F32;
        if (output_format == "png") return ImageFormat::Png16;
        if (output_format == "tiff" || output_format == "tif") {
            return ImageFormat::Tiff16;
        }
        throw ValidationError("output_format must be one of f32, png, tiff");
    }

    std::string image_extension() const {
        switch (image_format()) {
        case ImageFormat::F32: return ".f32";
        case ImageFormat::Png16: return ".png";
        case ImageFormat::Tiff16: return ".tif";
        }
        return ".f32";
    }
};

void reject_unknown_keys(const json& j, const std::vector<std::string>& known,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ValidationError("config: unknown key \"" + key + "\" in " + where);
        }
    }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig load_config(const fs::path& path) {
    RunConfig cfg;
    std::ifstream in(path);
    if (!in) throw IoError(path.string() + ": cannot open config");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": invalid JSON: " + e.what());
    }

    reject_unknown_keys(j, {"seed", "output_dir", "output_format", "crop_width",
                            "clamp_floor", "log_sigma", "kappa", "jobs", "mdl",
                            "thresholds", "physics", "sensor", "cloud", "sim",
                            "campaign"},
                        "top level");
    maybe(j, "seed", cfg.seed);
    maybe(j, "output_dir", cfg.output_dir);
    maybe(j, "output_format", cfg.output_format);
    maybe(j, "crop_width", cfg.crop_width);
    maybe(j, "clamp_floor", cfg.clamp_floor);
    maybe(j, "log_sigma", cfg.log_sigma);
    maybe(j, "kappa", cfg.kappa);
    maybe(j, "jobs", cfg.jobs);
    if (j.contains("mdl")) {
        const json& m = j["mdl"];
        reject_unknown_keys(m, {"mesh_edge_l", "sigma_min", "sigma_max",
                                "sigma_points", "residual_window"},
                            "mdl");
        maybe(m, "mesh_edge_l", cfg.mdl.mesh_edge_l);
        maybe(m, "sigma_min", cfg.mdl.sigma_min);
        maybe(m, "sigma_max", cfg.mdl.sigma_max);
        maybe(m, "sigma_points", cfg.mdl.sigma_points);
        maybe(m, "residual_window", cfg.mdl.residual_window);
    }
    if (j.contains("thresholds")) {
        const json& t = j["thresholds"];
        reject_unknown_keys(t, {"mk_max", "sk_max"}, "thresholds");
        maybe(t, "mk_max", cfg.thresholds.mk_max);
        maybe(t, "sk_max", cfg.thresholds.sk_max);
    }
    if (j.contains("physics")) {
        const json& p = j["physics"];
        reject_unknown_keys(p, {"atom_mass_kg", "boltzmann_J_per_K", "tof_s",
                                "pixel_pitch_um", "cross_section_um2"},
                            "physics");
        maybe(p, "atom_mass_kg", cfg.physics.atom_mass_kg);
        maybe(p, "boltzmann_J_per_K", cfg.physics.boltzmann_J_per_K);
        maybe(p, "tof_s", cfg.physics.tof_s);
        maybe(p, "pixel_pitch_um", cfg.physics.pixel_pitch_um);
        maybe(p, "cross_section_um2", cfg.physics.cross_section_um2);
    }
    if (j.contains("sensor")) {
        const json& s = j["sensor"];
        reject_unknown_keys(s, {"gain", "dark_mean", "dark_std", "read_mu",
                                "read_sigma", "quant_step", "clip_max", "shot_noise"},
                            "sensor");
        maybe(s, "gain", cfg.sensor.gain_K);
        maybe(s, "dark_mean", cfg.sensor.dark_mean);
        maybe(s, "dark_std", cfg.sensor.dark_std);
        maybe(s, "read_mu", cfg.sensor.read_mu);
        maybe(s, "read_sigma", cfg.sensor.read_sigma);
        maybe(s, "quant_step", cfg.sensor.quant_step_q);
        maybe(s, "clip_max", cfg.sensor.clip_max);
        maybe(s, "shot_noise", cfg.sensor.shot_noise);
    }
    if (j.contains("cloud")) {
        const json& c = j["cloud"];
        reject_unknown_keys(c, {"amplitude", "center_x", "center_y", "sigma_x",
                                "sigma_y", "baseline_light"},
                            "cloud");
        maybe(c, "amplitude", cfg.cloud.amplitude);
        maybe(c, "center_x", cfg.cloud.center_x);
        maybe(c, "center_y", cfg.cloud.center_y);
        maybe(c, "sigma_x", cfg.cloud.sigma_x);
        maybe(c, "sigma_y", cfg.cloud.sigma_y);
        maybe(c, "baseline_light", cfg.cloud.baseline_light);
    }
    if (j.contains("sim")) {
        const json& s = j["sim"];
        reject_unknown_keys(s, {"width", "height"}, "sim");
        maybe(s, "width", cfg.sim.width);
        maybe(s, "height", cfg.sim.height);
    }
    if (j.contains("campaign")) {
        const json& c = j["campaign"];
        reject_unknown_keys(c, {"temperature_nK", "sigma0_px", "delays_ms", "shots"},
                            "campaign");
        maybe(c, "temperature_nK", cfg.campaign.temperature_nK);
        maybe(c, "sigma0_px", cfg.campaign.sigma0_px);
        maybe(c, "delays_ms", cfg.campaign.delays_ms);
        maybe(c, "shots", cfg.campaign.shots);
    }
    return cfg;
}

json config_to_json(const RunConfig& cfg) {
    return json{
        {"seed", cfg.seed},
        {"output_dir", cfg.output_dir},
        {"output_format", cfg.output_format},
        {"crop_width", cfg.crop_width},
        {"clamp_floor", cfg.clamp_floor},
        {"log_sigma", cfg.log_sigma},
        {"kappa", cfg.kappa},
        {"jobs", cfg.jobs},
        {"mdl",
         {{"mesh_edge_l", cfg.mdl.mesh_edge_l},
          {"sigma_min", cfg.mdl.sigma_min},
          {"sigma_max", cfg.mdl.sigma_max},
          {"sigma_points", cfg.mdl.sigma_points},
          {"residual_window", cfg.mdl.residual_window}}},
        {"thresholds",
         {{"mk_max", cfg.thresholds.mk_max}, {"sk_max", cfg.thresholds.sk_max}}},
        {"physics",
         {{"atom_mass_kg", cfg.physics.atom_mass_kg},
          {"boltzmann_J_per_K", cfg.physics.boltzmann_J_per_K},
          {"tof_s", cfg.physics.tof_s},
          {"pixel_pitch_um", cfg.physics.pixel_pitch_um},
          {"cross_section_um2", cfg.physics.cross_section_um2}}},
        {"sensor",
         {{"gain", cfg.sensor.gain_K},
          {"dark_mean", cfg.sensor.dark_mean},
          {"dark_std", cfg.sensor.dark_std},
          {"read_mu", cfg.sensor.read_mu},
          {"read_sigma", cfg.sensor.read_sigma},
          {"quant_step", cfg.sensor.quant_step_q},
          {"clip_max", cfg.sensor.clip_max},
          {"shot_noise", cfg.sensor.shot_noise}}},
        {"cloud",
         {{"amplitude", cfg.cloud.amplitude},
          {"center_x", cfg.cloud.center_x},
          {"center_y", cfg.cloud.center_y},
          {"sigma_x", cfg.cloud.sigma_x},
          {"sigma_y", cfg.cloud.sigma_y},
          {"baseline_light", cfg.cloud.baseline_light}}},
        {"sim", {{"width", cfg.sim.width}, {"height", cfg.sim.height}}},
        {"campaign",
         {{"temperature_nK", cfg.campaign.temperature_nK},
          {"sigma0_px", cfg.campaign.sigma0_px},
          {"delays_ms", cfg.campaign.delays_ms},
          {"shots", cfg.campaign.shots}}},
    };
}

// ----------------------------------------------------------------- helpers

class StageTimer {
public:
    void start(const std::string& name) {
        name_ = name;
        t0_ = std::chrono::steady_clock::now();
    }
    void stop() {
        const auto dt = std::chrono::steady_clock::now() - t0_;
        timings_[name_] =
            std::chrono::duration_cast<std::chrono::microseconds>(dt).count() / 1000.0;
    }
    json to_json() const { return timings_; }

private:
    std::string name_;
    std::chrono::steady_clock::time_point t0_;
    json timings_ = json::object();
};

void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out << j.dump(2) << "\n";
}

void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::string>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out << header << "\r\n";
    for (const std::string& row : rows) out << row << "\r\n";
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json stats_json(const RegionStats& s) {
    return json{{"mean", s.mean}, {"stddev", s.stddev}, {"count", s.count}};
}

uint64_t effective_seed(const RunConfig& cfg) {
    if (const char* env = std::getenv("ATOMSHADOW_SEED")) {
        return std::strtoull(env, nullptr, 10);
    }
    return cfg.seed;
}

ImageGrid load_od_input(const RunConfig& cfg, const std::string& od_path,
                        const std::string& atoms, const std::string& light,
                        const std::string& dark, OdResult* od_result) {
    if (!od_path.empty()) {
        return load_image(od_path);
    }
    if (atoms.empty() || light.empty() || dark.empty()) {
        throw ValidationError("provide either --od or all of --atoms/--light/--dark");
    }
    RawTriplet triplet;
    triplet.atoms = load_image(atoms);
    triplet.light = load_image(light);
    triplet.dark = load_image(dark);
    *od_result = compute_optical_density(triplet, {.clamp_floor = cfg.clamp_floor});
    return od_result->od;
}

// ------------------------------------------------------------ cmd: enhance

json enhance_component_report(const EnhanceResult& r, const PhysicalContext& ctx) {
    const Segmentation& seg = r.filter.segmentation;
    json report;
    report["center"] = {{"x", r.filter.center.x}, {"y", r.filter.center.y}};
    report["segmentation"] = {
        {"center_x", seg.center_x},
        {"center_y", seg.center_y},
        {"r_s", seg.r_s},
        {"r_m", seg.r_m},
        {"r_e", seg.r_e},
        {"pixels_J", seg.mask_J.size()},
        {"pixels_L", seg.mask_L.size()},
        {"pixels_K", seg.mask_K.size()},
        {"fit",
         {{"amplitude", seg.fit.amplitude},
          {"center", seg.fit.center},
          {"sigma", seg.fit.sigma},
          {"offset", seg.fit.offset},
          {"residual_rms", seg.fit.residual_rms},
          {"converged", seg.fit.converged}}}};
    report["sigma_field"] = {
        {"sigma_s", r.filter.field.sigma_s},
        {"sigma_m", r.filter.field.sigma_m},
        {"sigma_e", r.filter.field.sigma_e},
        {"calibration_satisfied", r.filter.field.calibration.satisfied},
        {"profile",
         {{"power_a", r.filter.field.profile.power_a},
          {"power_p", r.filter.field.profile.power_p},
          {"arc_radius", r.filter.field.profile.arc_radius},
          {"arc_yc", r.filter.field.profile.arc_yc},
          {"arc_sign", r.filter.field.profile.arc_sign},
          {"parabolic_landing", r.filter.field.profile.parabolic_landing},
          {"flat", r.filter.field.profile.flat}}}};
    report["gray"] = {{"g_l", r.gray.g_l}, {"g_h", r.gray.g_h}, {"y1", r.gray.y1},
                      {"a", r.gray.a},     {"b", r.gray.b},     {"r", r.gray.r},
                      {"gamma", r.gray.gamma}, {"m", r.gray.m}, {"kappa", r.gray.kappa}};
    report["knees"] = {{"fallback", r.knees.fallback},
                       {"p_minima", stats_json(r.knees.p_minima)},
                       {"q_maxima", stats_json(r.knees.q_maxima)},
                       {"kappa_retries", r.kappa_retries}};
    report["background"] = {
        {"od",
         {{"raw", stats_json(r.bg_raw.input_units)},
          {"filtered", stats_json(r.bg_filtered.input_units)},
          {"enhanced", stats_json(r.bg_enhanced.input_units)}}},
        {"working",
         {{"raw", stats_json(r.bg_raw.working_scale)},
          {"filtered", stats_json(r.bg_filtered.working_scale)},
          {"enhanced", stats_json(r.bg_enhanced.working_scale)}}},
        {"display",
         {{"raw", stats_json(r.bg_raw.display_scale)},
          {"filtered", stats_json(r.bg_filtered.display_scale)},
          {"enhanced", stats_json(r.bg_enhanced.display_scale)}}}};

    json warnings = json::array();
    if (!r.filter.field.calibration.satisfied) {
        warnings.push_back("background thresholds unreachable; sigma_e at grid max");
    }
    if (r.knees.fallback) warnings.push_back("knee ordering fallback used");
    if (r.kappa_retries > 0) warnings.push_back("kappa relaxed for a solvable arc");
    if (r.out_of_range_pixels > 0) {
        warnings.push_back("out-of-range gray inputs passed through: " +
                           std::to_string(r.out_of_range_pixels));
    }
    report["warnings"] = warnings;

    json metrics = json::object();
    // Raw size from the segmentation's full-profile fit (unbiased on raw
    // crops); the enhanced size from the core window, which keeps the
    // background-level blur out of the fit.
    const double fwhm_raw_px = fwhm_from_sigma(seg.fit.sigma);
    metrics["fwhm_raw_px"] = fwhm_raw_px;
    metrics["fwhm_raw_um"] = fwhm_raw_px * ctx.pixel_pitch_m * 1e6;
    try {
        const GaussFit1D fit = fit_core_cross_section(r.enhanced, seg);
        const double fwhm_px = fwhm_from_sigma(fit.sigma);
        const double fwhm_m = fwhm_px * ctx.pixel_pitch_m;
        metrics["fwhm_px"] = fwhm_px;
        metrics["fwhm_um"] = fwhm_m * 1e6;
        metrics["temperature_nK"] = temperature_from_fwhm(fwhm_m, ctx) * 1e9;
    } catch (const Error&) {
        metrics["fwhm_px"] = nullptr;
    }
    metrics["atom_number_raw"] = particle_number(r.filter.raw_crop, ctx);
    // Enhanced count: raw OD integrated over the pipeline's segmented atom
    // disk. The gray-transformed image is display-scaled, and the varying
    // blur does not conserve mass, so neither is meant for counting.
    metrics["atom_number_enhanced"] =
        particle_number(r.filter.raw_crop, ctx, atom_disk_mask(seg));
    report["metrics"] = metrics;
    return report;
}

void write_component_outputs(const EnhanceResult& r, const RunConfig& cfg,
                             const fs::path& dir, const std::string& suffix,
                             json& report) {
    const std::string ext = cfg.image_extension();
    const ImageFormat format = cfg.image_format();

    // Diagnostics always go out as float binaries; integer formats cannot
    // hold negative OD values or fractional widths.
    const fs::path filtered_path = dir / ("filtered" + suffix + ext);
    const fs::path enhanced_path = dir / ("enhanced" + suffix + ext);
    const fs::path field_path = dir / ("sigma_field" + suffix + ".f32");
    save_image(r.filter.filtered, filtered_path, format);
    save_image(r.enhanced, enhanced_path, format);
    save_image(r.filter.field.sigmas, field_path, ImageFormat::F32);

    const fs::path seg_path = dir / ("segmentation" + suffix + ".json");
    const Segmentation& seg = r.filter.segmentation;
    write_json(json{{"center_x", seg.center_x},
                    {"center_y", seg.center_y},
                    {"r_s", seg.r_s},
                    {"r_m", seg.r_m},
                    {"r_e", seg.r_e},
                    {"fit_amplitude", seg.fit.amplitude},
                    {"fit_sigma", seg.fit.sigma},
                    {"fit_offset", seg.fit.offset}},
               seg_path);

    const int mid = r.filter.raw_crop.height / 2;
    std::vector<std::string> rows;
    for (int x = 0; x < r.filter.raw_crop.width; ++x) {
        rows.push_back(std::to_string(x) + "," + fmt(r.filter.raw_crop.at(x, mid)) +
                       "," + fmt(r.filter.filtered.at(x, mid)) + "," +
                       fmt(r.enhanced.at(x, mid)));
    }
    write_csv(dir / ("cross_sections" + suffix + ".csv"),
              "x,raw_od,filtered_od,enhanced_od", rows);

    // Background gray-level histograms, each image on its own display scale.
    const auto histogram = [&](const ImageGrid& image) {
        std::vector<size_t> counts(64, 0);
        const double lo = min_pixel(image);
        const double hi = max_pixel(image);
        const double width = hi > lo ? hi - lo : 1.0;
        for (size_t idx : r.filter.segmentation.mask_K) {
            const double v = (image.pixels[idx] - lo) / width;
            const int bin = std::clamp(static_cast<int>(v * 64.0), 0, 63);
            ++counts[static_cast<size_t>(bin)];
        }
        return counts;
    };
    const auto raw_h = histogram(r.filter.raw_crop);
    const auto filt_h = histogram(r.filter.filtered);
    const auto enh_h = histogram(r.enhanced);
    std::vector<std::string> hist_rows;
    for (size_t b = 0; b < 64; ++b) {
        hist_rows.push_back(fmt((b + 0.5) / 64.0) + "," + std::to_string(raw_h[b]) +
                            "," + std::to_string(filt_h[b]) + "," +
                            std::to_string(enh_h[b]));
    }
    write_csv(dir / ("background_histogram" + suffix + ".csv"),
              "bin_center,raw_count,filtered_count,enhanced_count", hist_rows);

    report["outputs"] = {
        {"filtered", filtered_path.string()},
        {"enhanced", enhanced_path.string()},
        {"sigma_field", field_path.string()},
        {"segmentation", seg_path.string()},
        {"cross_sections", (dir / ("cross_sections" + suffix + ".csv")).string()},
        {"background_histogram",
         (dir / ("background_histogram" + suffix + ".csv")).string()}};
}

int cmd_enhance(const RunConfig& cfg, const std::string& od_path,
                const std::string& atoms, const std::string& light,
                const std::string& dark) {
    StageTimer timer;
    fs::create_directories(cfg.output_dir);
    const fs::path dir(cfg.output_dir);

    timer.start("load");
    OdResult od_counters;
    const ImageGrid od = load_od_input(cfg, od_path, atoms, light, dark, &od_counters);
    timer.stop();

    // One pipeline run per detected component; a single cloud gives one.
    timer.start("detect");
    const std::vector<Component> components = detect_components(od, cfg.log_sigma);
    timer.stop();
    std::vector<Center> centers;
    if (!components.empty()) {
        // Keep substantial blobs that are far enough apart to crop separately.
        const double mass_floor = 0.2 * components.front().mass;
        const double min_separation = 0.45 * cfg.crop_width;
        for (const Component& c : components) {
            if (c.mass < mass_floor || c.pixel_count < 25 || centers.size() >= 8) {
                continue;
            }
            bool distinct = true;
            for (const Center& seen : centers) {
                if (std::hypot(c.centroid_x - seen.x, c.centroid_y - seen.y) <
                    min_separation) {
                    distinct = false;
                    break;
                }
            }
            if (distinct) centers.push_back({c.centroid_x, c.centroid_y});
        }
    }
    if (centers.empty()) {
        // Structured noise can shred the support mask; the support-union
        // centroid still lands on the dominant cloud.
        centers.push_back(find_center(od, cfg.log_sigma));
    }

    timer.start("enhance");
    const EnhanceConfig ecfg = cfg.enhance_config();
    const PhysicalContext ctx = cfg.physical_context();
    json component_reports = json::array();
    for (size_t i = 0; i < centers.size(); ++i) {
        const EnhanceResult result = enhance_at(od, centers[i], ecfg);
        json report = enhance_component_report(result, ctx);
        const std::string suffix = centers.size() == 1 ? "" : "_c" + std::to_string(i);
        write_component_outputs(result, cfg, dir, suffix, report);
        component_reports.push_back(std::move(report));
    }
    timer.stop();

    json report;
    report["config"] = config_to_json(cfg);
    report["input"] = od_path.empty()
                          ? json{{"atoms", atoms}, {"light", light}, {"dark", dark}}
                          : json{{"od", od_path}};
    if (od_path.empty()) {
        report["od_counters"] = {{"clamped_pixels", od_counters.clamped_pixels},
                                 {"unlit_pixels", od_counters.unlit_pixels}};
    }
    report["components"] = std::move(component_reports);
    report["timings_ms"] = timer.to_json();
    write_json(report, dir / "report.json");
    std::cout << "enhanced " << centers.size() << " component(s) -> "
              << (dir / "report.json").string() << "\n";
    return kExitOk;
}

// ----------------------------------------------------------------- cmd: od

int cmd_od(const RunConfig& cfg, const std::string& atoms, const std::string& light,
           const std::string& dark, std::string out) {
    StageTimer timer;
    fs::create_directories(cfg.output_dir);
    timer.start("od");
    RawTriplet triplet;
    triplet.atoms = load_image(atoms);
    triplet.light = load_image(light);
    triplet.dark = load_image(dark);
    const OdResult result =
        compute_optical_density(triplet, {.clamp_floor = cfg.clamp_floor});
    timer.stop();

    if (out.empty()) out = (fs::path(cfg.output_dir) / "od.f32").string();
    save_image(result.od, out);

    json report;
    report["config"] = config_to_json(cfg);
    report["input"] = {{"atoms", atoms}, {"light", light}, {"dark", dark}};
    report["output"] = out;
    report["clamped_pixels"] = result.clamped_pixels;
    report["unlit_pixels"] = result.unlit_pixels;
    report["timings_ms"] = timer.to_json();
    write_json(report, fs::path(cfg.output_dir) / "od_report.json");
    std::cout << "wrote " << out << "\n";
    return kExitOk;
}

// ----------------------------------------------------------- cmd: simulate

int cmd_simulate(const RunConfig& cfg) {
    fs::create_directories(cfg.output_dir);
    const fs::path dir(cfg.output_dir);
    const uint64_t seed = effective_seed(cfg);

    const CloudScene scene = render_cloud_scene(cfg.cloud, cfg.sim.width,
                                                cfg.sim.height,
                                                cfg.physics.pixel_pitch_um);
    if (!scene.footprint_inside) {
        std::cerr << "warning: cloud footprint (center +/- 4 sigma) leaves the grid\n";
    }
    const RawTriplet triplet = simulate_triplet(scene, cfg.sensor, Seed{seed});

    const std::string ext = cfg.image_extension();
    const ImageFormat format = cfg.image_format();
    save_image(triplet.atoms, dir / ("atoms" + ext), format);
    save_image(triplet.light, dir / ("light" + ext), format);
    save_image(triplet.dark, dir / ("dark" + ext), format);

    json manifest;
    manifest["config"] = config_to_json(cfg);
    manifest["seed"] = seed;
    manifest["sub_seeds"] = {seed ^ 1ull, seed ^ 2ull, seed ^ 3ull};
    manifest["quantization"] =
        "round to the nearest multiple of q; error uniform within +/- q/2";
    manifest["footprint_inside"] = scene.footprint_inside;
    manifest["outputs"] = {{"atoms", (dir / ("atoms" + ext)).string()},
                           {"light", (dir / ("light" + ext)).string()},
                           {"dark", (dir / ("dark" + ext)).string()}};
    write_json(manifest, dir / "manifest.json");
    std::cout << "wrote triplet + manifest under " << dir.string() << "\n";
    return kExitOk;
}

// ----------------------------------------------------------- cmd: campaign

struct ShotRow {
    bool ok = false;
    std::string error;
    double fwhm_raw_px = 0.0;
    double fwhm_enh_px = 0.0;
    double atoms_raw = 0.0;
    double atoms_enh = 0.0;
};

int cmd_campaign(const RunConfig& cfg) {
    if (cfg.campaign.shots < 2) {
        throw ValidationError("campaign needs at least 2 shots per delay");
    }
    if (cfg.campaign.delays_ms.empty()) {
        throw ValidationError("campaign needs at least one delay");
    }
    fs::create_directories(cfg.output_dir);
    const fs::path dir(cfg.output_dir);
    const uint64_t seed = effective_seed(cfg);
    const PhysicalContext ctx = cfg.physical_context();
    const EnhanceConfig ecfg = cfg.enhance_config();

    // Ballistic expansion sigma^2(t) = sigma0^2 + (2 k_B T / m) t^2, the same
    // convention the temperature estimators invert.
    const double temperature_K = cfg.campaign.temperature_nK * 1e-9;
    const double expansion =
        2.0 * ctx.boltzmann_J_per_K * temperature_K / ctx.atom_mass_kg;

    const int n_delays = static_cast<int>(cfg.campaign.delays_ms.size());
    const int n_shots = cfg.campaign.shots;
    std::vector<ShotRow> rows(static_cast<size_t>(n_delays) * n_shots);

    const long total = static_cast<long>(rows.size());
#ifdef _OPENMP
    const int thread_count = cfg.jobs > 0 ? cfg.jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(thread_count)
#endif
    for (long task = 0; task < total; ++task) {
        const int d = static_cast<int>(task) / n_shots;
        const int s = static_cast<int>(task) % n_shots;
        ShotRow& row = rows[static_cast<size_t>(task)];
        try {
            const double t = cfg.campaign.delays_ms[static_cast<size_t>(d)] * 1e-3;
            const double sigma_m2 =
                std::pow(cfg.campaign.sigma0_px * ctx.pixel_pitch_m, 2) +
                expansion * t * t;
            const double sigma_px = std::sqrt(sigma_m2) / ctx.pixel_pitch_m;

            CloudModel cloud = cfg.cloud;
            cloud.sigma_x = sigma_px;
            cloud.sigma_y = sigma_px;
            cloud.center_x = cfg.sim.width / 2.0;
            cloud.center_y = cfg.sim.height / 2.0;

            const uint64_t shot_seed =
                seed ^ detail::splitmix_fin((static_cast<uint64_t>(d) << 32) |
                                            static_cast<uint64_t>(s + 1));
            const RawTriplet triplet =
                simulate_triplet(cloud, cfg.sensor, Seed{shot_seed}, cfg.sim.width,
                                 cfg.sim.height, cfg.physics.pixel_pitch_um);
            const ImageGrid od =
                compute_optical_density(triplet, {.clamp_floor = cfg.clamp_floor}).od;

            const EnhanceResult result = enhance(od, ecfg);
            const Segmentation& seg = result.filter.segmentation;
            const GaussFit1D enh_fit = fit_core_cross_section(result.enhanced, seg);
            if (!enh_fit.converged) {
                throw SegmentationError("cross-section fit did not converge");
            }
            row.fwhm_raw_px = fwhm_from_sigma(seg.fit.sigma);
            row.fwhm_enh_px = fwhm_from_sigma(enh_fit.sigma);
            // Classic analysis integrates the whole raw frame; the enhanced
            // analysis integrates raw OD over the pipeline's segmented atom
            // disk, which removes the background-area noise.
            row.atoms_raw = particle_number(od, ctx);
            row.atoms_enh =
                particle_number(result.filter.raw_crop, ctx, atom_disk_mask(seg));
            row.ok = true;
        } catch (const Error& e) {
            row.error = e.what();
        }
    }

    // Aggregate by delay; output order follows (delay, shot) indices, not
    // completion order.
    std::vector<std::string> shot_lines;
    std::vector<std::string> delay_lines;
    std::vector<std::pair<double, double>> raw_series, enh_series;
    double error_bar_ratio_sum = 0.0;
    int error_bar_ratio_count = 0;
    size_t failures = 0;
    for (int d = 0; d < n_delays; ++d) {
        std::vector<double> fr, fe, ar, ae;
        for (int s = 0; s < n_shots; ++s) {
            const ShotRow& row = rows[static_cast<size_t>(d) * n_shots + s];
            if (!row.ok) {
                ++failures;
                continue;
            }
            fr.push_back(row.fwhm_raw_px);
            fe.push_back(row.fwhm_enh_px);
            ar.push_back(row.atoms_raw);
            ae.push_back(row.atoms_enh);
            shot_lines.push_back(
                fmt(cfg.campaign.delays_ms[static_cast<size_t>(d)]) + "," +
                std::to_string(s) + "," + fmt(row.fwhm_raw_px) + "," +
                fmt(row.fwhm_enh_px) + "," + fmt(row.atoms_raw) + "," +
                fmt(row.atoms_enh));
        }
        if (fr.size() < 2) {
            throw SegmentationError("campaign: too few usable shots at delay index " +
                                    std::to_string(d));
        }
        const SeriesStats s_fr = shot_series_stats(fr);
        const SeriesStats s_fe = shot_series_stats(fe);
        const SeriesStats s_ar = shot_series_stats(ar);
        const SeriesStats s_ae = shot_series_stats(ae);
        const double t = cfg.campaign.delays_ms[static_cast<size_t>(d)] * 1e-3;
        raw_series.emplace_back(t, s_fr.mean * ctx.pixel_pitch_m);
        enh_series.emplace_back(t, s_fe.mean * ctx.pixel_pitch_m);
        if (s_ae.stddev > 0.0) {
            error_bar_ratio_sum += s_ar.stddev / s_ae.stddev;
            ++error_bar_ratio_count;
        }
        delay_lines.push_back(
            fmt(cfg.campaign.delays_ms[static_cast<size_t>(d)]) + "," +
            std::to_string(fr.size()) + "," + fmt(s_fr.mean) + "," + fmt(s_fr.stddev) +
            "," + fmt(s_fe.mean) + "," + fmt(s_fe.stddev) + "," + fmt(s_ar.mean) +
            "," + fmt(s_ar.stddev) + "," + fmt(s_ae.mean) + "," + fmt(s_ae.stddev));
    }

    write_csv(dir / "campaign_shots.csv",
              "delay_ms,shot,fwhm_raw_px,fwhm_enhanced_px,atoms_raw,atoms_enhanced",
              shot_lines);
    write_csv(dir / "campaign.csv",
              "delay_ms,shots,fwhm_raw_px_mean,fwhm_raw_px_std,fwhm_enhanced_px_mean,"
              "fwhm_enhanced_px_std,atoms_raw_mean,atoms_raw_std,atoms_enhanced_mean,"
              "atoms_enhanced_std",
              delay_lines);

    json summary;
    summary["config"] = config_to_json(cfg);
    summary["seed"] = seed;
    summary["failed_shots"] = failures;
    summary["injected_temperature_nK"] = cfg.campaign.temperature_nK;
    summary["temperature_raw_nK"] = temperature_from_expansion(raw_series, ctx) * 1e9;
    summary["temperature_enhanced_nK"] =
        temperature_from_expansion(enh_series, ctx) * 1e9;
    if (error_bar_ratio_count > 0) {
        summary["atom_number_error_bar_ratio"] =
            error_bar_ratio_sum / error_bar_ratio_count;
    }
    write_json(summary, dir / "campaign_summary.json");
    std::cout << "campaign complete: " << (dir / "campaign.csv").string() << "\n";
    return kExitOk;
}

// ------------------------------------------------------------ cmd: metrics

int cmd_metrics(const RunConfig& cfg, const std::string& od_path,
                const std::string& enhanced_path, const std::string& shot_id) {
    fs::create_directories(cfg.output_dir);
    const PhysicalContext ctx = cfg.physical_context();
    const ImageGrid od = load_image(od_path);

    const Center center = find_center(od, cfg.log_sigma);
    const ImageGrid crop = crop_centered(od, center, cfg.crop_width);
    const int mid = crop.height / 2;
    std::vector<double> row(static_cast<size_t>(crop.width));
    for (int x = 0; x < crop.width; ++x) row[static_cast<size_t>(x)] = crop.at(x, mid);
    const GaussFit1D fit = fit_gaussian_1d(row);
    if (!fit.converged) {
        throw SegmentationError("metrics: cross-section fit did not converge");
    }

    ShotMetrics metrics;
    metrics.fwhm_px = fwhm_from_sigma(fit.sigma);
    metrics.fwhm_m = metrics.fwhm_px * ctx.pixel_pitch_m;
    metrics.temperature_K = temperature_from_fwhm(metrics.fwhm_m, ctx);
    metrics.atom_number_raw = particle_number(crop, ctx);
    metrics.atom_number_enhanced = metrics.atom_number_raw;
    if (!enhanced_path.empty()) {
        const ImageGrid enhanced = load_image(enhanced_path);
        metrics.atom_number_enhanced = particle_number(enhanced, ctx);
    }

    write_csv(fs::path(cfg.output_dir) / "metrics.csv",
              "shot_id,fwhm_px,fwhm_um,temperature_nK,atom_number_raw,"
              "atom_number_enhanced",
              {shot_id + "," + fmt(metrics.fwhm_px) + "," + fmt(metrics.fwhm_m * 1e6) +
               "," + fmt(metrics.temperature_K * 1e9) + "," +
               fmt(metrics.atom_number_raw) + "," + fmt(metrics.atom_number_enhanced)});

    json out;
    out["shot_id"] = shot_id;
    out["center"] = {{"x", center.x}, {"y", center.y}};
    out["fwhm_px"] = metrics.fwhm_px;
    out["fwhm_um"] = metrics.fwhm_m * 1e6;
    out["temperature_nK"] = metrics.temperature_K * 1e9;
    out["atom_number_raw"] = metrics.atom_number_raw;
    out["atom_number_enhanced"] = metrics.atom_number_enhanced;
    write_json(out, fs::path(cfg.output_dir) / "metrics.json");
    std::cout << "wrote " << (fs::path(cfg.output_dir) / "metrics.csv").string()
              << "\n";
    return kExitOk;
}

// -------------------------------------------------------------------- main

void add_config_flags(CLI::App& app, RunConfig& cfg) {
    app.add_option("--seed", cfg.seed, "RNG seed (ATOMSHADOW_SEED overrides)");
    app.add_option("--output-dir", cfg.output_dir, "output directory");
    app.add_option("--output-format", cfg.output_format, "f32 | png | tiff");
    app.add_option("--crop-width", cfg.crop_width, "analysis crop width (odd)");
    app.add_option("--clamp-floor", cfg.clamp_floor, "OD ratio clamp floor");
    app.add_option("--log-sigma", cfg.log_sigma, "blob detector scale, px");
    app.add_option("--kappa", cfg.kappa, "gray-transform knee fraction");
    app.add_option("--jobs", cfg.jobs, "max concurrent shots (0 = all cores)");
    app.add_option("--mdl.mesh-edge-l", cfg.mdl.mesh_edge_l, "MDL mesh edge l");
    app.add_option("--mdl.sigma-min", cfg.mdl.sigma_min, "sigma grid lower bound");
    app.add_option("--mdl.sigma-max", cfg.mdl.sigma_max, "sigma grid upper bound");
    app.add_option("--mdl.sigma-points", cfg.mdl.sigma_points, "sigma grid size");
    app.add_option("--mdl.residual-window", cfg.mdl.residual_window,
                   "MDL residual window (odd)");
    app.add_option("--thresholds.mk-max", cfg.thresholds.mk_max,
                   "background mean threshold");
    app.add_option("--thresholds.sk-max", cfg.thresholds.sk_max,
                   "background stddev threshold");
    app.add_option("--physics.atom-mass-kg", cfg.physics.atom_mass_kg, "atom mass");
    app.add_option("--physics.boltzmann-J-per-K", cfg.physics.boltzmann_J_per_K,
                   "Boltzmann constant");
    app.add_option("--physics.tof-s", cfg.physics.tof_s, "time of flight, s");
    app.add_option("--physics.pixel-pitch-um", cfg.physics.pixel_pitch_um,
                   "pixel pitch, um");
    app.add_option("--physics.cross-section-um2", cfg.physics.cross_section_um2,
                   "absorption cross-section, um^2");
    app.add_option("--sensor.gain", cfg.sensor.gain_K, "system gain K");
    app.add_option("--sensor.dark-mean", cfg.sensor.dark_mean, "dark electrons");
    app.add_option("--sensor.dark-std", cfg.sensor.dark_std, "dark spread");
    app.add_option("--sensor.read-mu", cfg.sensor.read_mu, "readout mean");
    app.add_option("--sensor.read-sigma", cfg.sensor.read_sigma, "readout sigma");
    app.add_option("--sensor.quant-step", cfg.sensor.quant_step_q, "ADC step q");
    app.add_option("--sensor.clip-max", cfg.sensor.clip_max, "saturation level");
    app.add_flag("--sensor.shot-noise,!--sensor.no-shot-noise", cfg.sensor.shot_noise,
                 "Poisson shot noise on/off");
    app.add_option("--cloud.amplitude", cfg.cloud.amplitude, "peak OD");
    app.add_option("--cloud.center-x", cfg.cloud.center_x, "cloud center x, px");
    app.add_option("--cloud.center-y", cfg.cloud.center_y, "cloud center y, px");
    app.add_option("--cloud.sigma-x", cfg.cloud.sigma_x, "cloud sigma x, px");
    app.add_option("--cloud.sigma-y", cfg.cloud.sigma_y, "cloud sigma y, px");
    app.add_option("--cloud.baseline-light", cfg.cloud.baseline_light,
                   "probe photoelectrons per pixel");
    app.add_option("--sim.width", cfg.sim.width, "simulated frame width");
    app.add_option("--sim.height", cfg.sim.height, "simulated frame height");
    app.add_option("--campaign.temperature-nk", cfg.campaign.temperature_nK,
                   "injected temperature, nK");
    app.add_option("--campaign.sigma0-px", cfg.campaign.sigma0_px,
                   "in-trap cloud sigma, px");
    app.add_option("--delays", cfg.campaign.delays_ms, "campaign delays, ms")
        ->delimiter(',');
    app.add_option("--shots", cfg.campaign.shots, "shots per delay");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"absorption-image enhancement pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON configuration file")
        ->check(CLI::ExistingFile);

    // Load --config before the real parse so flag values override it.
    RunConfig cfg;
    for (int i = 1; i < argc - 1; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                cfg = load_config(argv[i + 1]);
            } catch (const Error& e) {
                std::cerr << "error: " << e.what() << "\n";
                return kExitInput;
            }
            break;
        }
    }
    add_config_flags(app, cfg);

    std::string atoms, light, dark, od_path, out_path, enhanced_path,
        shot_id = "shot0";

    CLI::App* od_cmd = app.add_subcommand("od", "optical density from a frame triplet");
    od_cmd->add_option("--atoms", atoms, "atoms frame (L)")->required();
    od_cmd->add_option("--light", light, "light frame (G)")->required();
    od_cmd->add_option("--dark", dark, "dark frame (N)")->required();
    od_cmd->add_option("--out", out_path, "output OD image path");

    CLI::App* enhance_cmd =
        app.add_subcommand("enhance", "adaptive filter + gray transform");
    enhance_cmd->add_option("--od", od_path, "precomputed OD image");
    enhance_cmd->add_option("--atoms", atoms, "atoms frame (L)");
    enhance_cmd->add_option("--light", light, "light frame (G)");
    enhance_cmd->add_option("--dark", dark, "dark frame (N)");

    CLI::App* simulate_cmd =
        app.add_subcommand("simulate", "synthetic triplet from the noise model");

    CLI::App* campaign_cmd =
        app.add_subcommand("campaign", "multi-shot expansion series, raw vs enhanced");

    CLI::App* metrics_cmd = app.add_subcommand("metrics", "shot metrics from an OD map");
    metrics_cmd->add_option("--od", od_path, "OD image")->required();
    metrics_cmd->add_option("--enhanced", enhanced_path, "enhanced image (optional)");
    metrics_cmd->add_option("--shot-id", shot_id, "identifier for the CSV row");

    // Config flags live on the parent app but may appear after the
    // subcommand name.
    for (CLI::App* sub : {od_cmd, enhance_cmd, simulate_cmd, campaign_cmd, metrics_cmd}) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e); // prints help or the parse error
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (od_cmd->parsed()) return cmd_od(cfg, atoms, light, dark, out_path);
        if (enhance_cmd->parsed()) return cmd_enhance(cfg, od_path, atoms, light, dark);
        if (simulate_cmd->parsed()) return cmd_simulate(cfg);
        if (campaign_cmd->parsed()) return cmd_campaign(cfg);
        if (metrics_cmd->parsed()) {
            return cmd_metrics(cfg, od_path, enhanced_path, shot_id);
        }
    } catch (const SegmentationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSegmentation;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitOk;
}
