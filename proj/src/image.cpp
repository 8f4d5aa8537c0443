#include "atomshadow/image.hpp"

#include "atomshadow/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace atomshadow {

ImageGrid::ImageGrid(int w, int h, double fill, std::optional<double> pitch_um)
    : width(w), height(h), pixel_pitch_um(pitch_um) {
    if (w < 1 || h < 1) {
        std::ostringstream msg;
        msg << "image dimensions must be >= 1, got " << w << "x" << h;
        throw ValidationError(msg.str());
    }
    pixels.assign(static_cast<size_t>(w) * static_cast<size_t>(h), fill);
}

void require_valid(const ImageGrid& image, const char* what) {
    if (image.width < 1 || image.height < 1 ||
        image.pixels.size() != static_cast<size_t>(image.width) * image.height) {
        std::ostringstream msg;
        msg << what << ": malformed grid (" << image.width << "x" << image.height
            << ", " << image.pixels.size() << " pixels)";
        throw ValidationError(msg.str());
    }
    for (size_t i = 0; i < image.pixels.size(); ++i) {
        if (!std::isfinite(image.pixels[i])) {
            std::ostringstream msg;
            msg << what << ": non-finite pixel at index " << i;
            throw ValidationError(msg.str());
        }
    }
}

double min_pixel(const ImageGrid& image) {
    double m = std::numeric_limits<double>::infinity();
    for (double v : image.pixels) m = std::min(m, v);
    return m;
}

double max_pixel(const ImageGrid& image) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : image.pixels) m = std::max(m, v);
    return m;
}

void require_congruent(const RawTriplet& triplet) {
    if (!triplet.atoms.congruent_with(triplet.light) ||
        !triplet.atoms.congruent_with(triplet.dark)) {
        std::ostringstream msg;
        msg << "triplet frames disagree in size: atoms " << triplet.atoms.width << "x"
            << triplet.atoms.height << ", light " << triplet.light.width << "x"
            << triplet.light.height << ", dark " << triplet.dark.width << "x"
            << triplet.dark.height;
        throw ValidationError(msg.str());
    }
}

OdResult compute_optical_density(const RawTriplet& triplet, const OdOptions& opts) {
    require_congruent(triplet);
    require_valid(triplet.atoms, "atoms frame");
    require_valid(triplet.light, "light frame");
    require_valid(triplet.dark, "dark frame");
    if (!(opts.clamp_floor > 0.0 && opts.clamp_floor < 1.0)) {
        throw ValidationError("clamp_floor must lie in (0,1)");
    }

    OdResult result;
    result.od = ImageGrid(triplet.atoms.width, triplet.atoms.height, 0.0,
                          triplet.atoms.pixel_pitch_um);
    const double lo = opts.clamp_floor;
    const double hi = 1.0 / opts.clamp_floor;
    for (size_t i = 0; i < triplet.atoms.pixels.size(); ++i) {
        const double signal = triplet.atoms.pixels[i] - triplet.dark.pixels[i];
        const double probe = triplet.light.pixels[i] - triplet.dark.pixels[i];
        if (probe <= 0.0) {
            // Unlit pixel: no probe light reached it, so transmission is
            // meaningless. Report zero OD instead of aborting the shot.
            result.od.pixels[i] = 0.0;
            ++result.unlit_pixels;
            continue;
        }
        double ratio = signal / probe;
        if (ratio < lo) {
            ratio = lo;
            ++result.clamped_pixels;
        } else if (ratio > hi) {
            ratio = hi;
            ++result.clamped_pixels;
        }
        result.od.pixels[i] = -std::log(ratio);
    }
    return result;
}

RegionStats region_stats(const ImageGrid& image, std::span<const size_t> mask) {
    if (mask.empty()) throw ValidationError("region_stats: empty mask");
    for (size_t idx : mask) {
        if (idx >= image.pixels.size()) {
            throw ValidationError("region_stats: mask index out of bounds");
        }
    }
    double sum = 0.0;
    for (size_t idx : mask) sum += image.pixels[idx];
    const double mean = sum / static_cast<double>(mask.size());
    double sq = 0.0;
    for (size_t idx : mask) {
        const double d = image.pixels[idx] - mean;
        sq += d * d;
    }
    RegionStats stats;
    stats.mean = mean;
    stats.stddev = std::sqrt(sq / static_cast<double>(mask.size()));
    stats.count = mask.size();
    return stats;
}

RegionStats region_stats(const ImageGrid& image) {
    std::vector<size_t> all(image.pixels.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    return region_stats(image, all);
}

Normalized normalize_unit(const ImageGrid& image) {
    require_valid(image, "normalize_unit input");
    const double lo = min_pixel(image);
    const double hi = max_pixel(image);
    if (!(hi > lo)) {
        throw ValidationError("normalize_unit: constant image has no unit range");
    }
    Normalized out;
    out.offset = lo;
    out.scale = hi - lo;
    out.image = ImageGrid(image.width, image.height, 0.0, image.pixel_pitch_um);
    for (size_t i = 0; i < image.pixels.size(); ++i) {
        out.image.pixels[i] = (image.pixels[i] - lo) / out.scale;
    }
    return out;
}

ImageGrid denormalize(const ImageGrid& image, double scale, double offset) {
    ImageGrid out = image;
    for (double& v : out.pixels) v = v * scale + offset;
    return out;
}

} // namespace atomshadow
