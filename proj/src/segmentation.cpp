#include "atomshadow/segmentation.hpp"

#include "atomshadow/convolve.hpp"
#include "atomshadow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace atomshadow {

namespace {

double median_of(std::vector<double> values) {
    const size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    double med = values[mid];
    if (values.size() % 2 == 0) {
        std::nth_element(values.begin(), values.begin() + (mid - 1), values.end());
        med = 0.5 * (med + values[mid - 1]);
    }
    return med;
}

// |LoG response - median| thresholded at 3 MAD (with a relative floor for
// noise-free backgrounds whose MAD collapses to zero).
std::vector<uint8_t> log_support_mask(const ImageGrid& image, double log_sigma) {
    const ImageGrid response = log_response(image, log_sigma);
    const double med = median_of(response.pixels);
    std::vector<double> abs_dev(response.pixels.size());
    for (size_t i = 0; i < response.pixels.size(); ++i) {
        abs_dev[i] = std::fabs(response.pixels[i] - med);
    }
    const double mad = median_of(abs_dev);
    double threshold = 3.0 * mad;
    if (!(threshold > 0.0)) {
        const double max_dev = *std::max_element(abs_dev.begin(), abs_dev.end());
        threshold = 1e-9 * max_dev;
    }
    std::vector<uint8_t> support(abs_dev.size(), 0);
    for (size_t i = 0; i < support.size(); ++i) {
        support[i] = abs_dev[i] > threshold ? 1 : 0;
    }
    return support;
}

} // namespace

std::vector<Component> detect_components(const ImageGrid& image, double log_sigma) {
    require_valid(image, "detect_components input");
    if (!(max_pixel(image) > min_pixel(image))) {
        throw ValidationError("detect_components: constant image has no features");
    }

    const int w = image.width;
    const int h = image.height;
    const std::vector<uint8_t> support = log_support_mask(image, log_sigma);

    // 8-connected component labeling over the support mask.
    std::vector<Component> components;
    std::vector<uint8_t> visited(support.size(), 0);
    std::vector<size_t> stack;
    for (size_t start = 0; start < support.size(); ++start) {
        if (!support[start] || visited[start]) continue;
        Component comp;
        double wx = 0.0, wy = 0.0;
        stack.assign(1, start);
        visited[start] = 1;
        while (!stack.empty()) {
            const size_t idx = stack.back();
            stack.pop_back();
            const int x = static_cast<int>(idx % w);
            const int y = static_cast<int>(idx / w);
            const double value = std::max(image.pixels[idx], 0.0);
            comp.mass += value;
            wx += value * x;
            wy += value * y;
            ++comp.pixel_count;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx;
                    const int ny = y + dy;
                    if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                    const size_t nidx = static_cast<size_t>(ny) * w + nx;
                    if (support[nidx] && !visited[nidx]) {
                        visited[nidx] = 1;
                        stack.push_back(nidx);
                    }
                }
            }
        }
        if (comp.mass > 0.0) {
            comp.centroid_x = wx / comp.mass;
            comp.centroid_y = wy / comp.mass;
            components.push_back(comp);
        }
    }
    std::sort(components.begin(), components.end(),
              [](const Component& a, const Component& b) { return a.mass > b.mass; });

    // The LoG support of one blob splits into a center disk and its
    // surrounding ring; fold components with near-coincident centroids back
    // into one blob.
    const double merge_radius = 4.0 * log_sigma;
    std::vector<Component> merged;
    for (const Component& c : components) {
        Component* host = nullptr;
        for (Component& m : merged) {
            if (std::hypot(c.centroid_x - m.centroid_x,
                           c.centroid_y - m.centroid_y) <= merge_radius) {
                host = &m;
                break;
            }
        }
        if (!host) {
            merged.push_back(c);
            continue;
        }
        const double total = host->mass + c.mass;
        host->centroid_x = (host->centroid_x * host->mass + c.centroid_x * c.mass) / total;
        host->centroid_y = (host->centroid_y * host->mass + c.centroid_y * c.mass) / total;
        host->mass = total;
        host->pixel_count += c.pixel_count;
    }
    std::sort(merged.begin(), merged.end(),
              [](const Component& a, const Component& b) { return a.mass > b.mass; });
    return merged;
}

Center find_center(const ImageGrid& image, double log_sigma) {
    require_valid(image, "find_center input");
    if (!(max_pixel(image) > min_pixel(image))) {
        throw ValidationError("find_center: constant image has no features");
    }

    // Intensity-weighted centroid of the original image over the LoG
    // support; the whole support, so multiple blobs average symmetrically.
    const std::vector<uint8_t> support = log_support_mask(image, log_sigma);
    double wsum = 0.0, wx = 0.0, wy = 0.0;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (!support[static_cast<size_t>(y) * image.width + x]) continue;
            const double v = std::max(image.at(x, y), 0.0);
            wsum += v;
            wx += v * x;
            wy += v * y;
        }
    }
    if (wsum > 0.0) return {wx / wsum, wy / wsum};

    // Empty or massless support: global intensity-weighted centroid,
    // shifted by the minimum when nothing is positive.
    wsum = wx = wy = 0.0;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const double v = std::max(image.at(x, y), 0.0);
            wsum += v;
            wx += v * x;
            wy += v * y;
        }
    }
    if (!(wsum > 0.0)) {
        const double lo = min_pixel(image);
        wsum = wx = wy = 0.0;
        for (int y = 0; y < image.height; ++y) {
            for (int x = 0; x < image.width; ++x) {
                const double v = image.at(x, y) - lo;
                wsum += v;
                wx += v * x;
                wy += v * y;
            }
        }
    }
    if (!(wsum > 0.0)) {
        throw ValidationError("find_center: image carries no usable intensity");
    }
    return {wx / wsum, wy / wsum};
}

ImageGrid crop_centered(const ImageGrid& image, Center center, int width) {
    require_valid(image, "crop input");
    if (width < 1 || width % 2 == 0) {
        throw ValidationError("crop width must be odd and >= 1");
    }
    if (width > 2 * std::min(image.width, image.height)) {
        std::ostringstream msg;
        msg << "crop width " << width << " exceeds twice the smaller image dimension ("
            << image.width << "x" << image.height << ")";
        throw ValidationError(msg.str());
    }
    const int half = width / 2;
    const int cx = static_cast<int>(std::llround(center.x));
    const int cy = static_cast<int>(std::llround(center.y));
    ImageGrid crop(width, width, 0.0, image.pixel_pitch_um);
    for (int y = 0; y < width; ++y) {
        const int sy = mirror_index(cy - half + y, image.height);
        for (int x = 0; x < width; ++x) {
            crop.at(x, y) = image.at(mirror_index(cx - half + x, image.width), sy);
        }
    }
    return crop;
}

double radius_factor(double level_fraction) {
    if (!(level_fraction > 0.0 && level_fraction < 1.0)) {
        throw ValidationError("radius level fraction must lie in (0,1)");
    }
    return std::sqrt(2.0 * std::log(1.0 / level_fraction));
}

Segmentation segment(const ImageGrid& cropped) {
    require_valid(cropped, "segment input");
    const int w = cropped.width;
    const int h = cropped.height;

    Segmentation seg;
    const int mid_row = h / 2;
    std::vector<double> row(static_cast<size_t>(w));
    for (int x = 0; x < w; ++x) row[static_cast<size_t>(x)] = cropped.at(x, mid_row);

    try {
        seg.fit = fit_gaussian_1d(row);
    } catch (const ValidationError& e) {
        throw SegmentationError(std::string("cross-section fit failed (") + e.what() +
                                "); skip enhancement for this shot");
    }
    if (!seg.fit.converged || !(seg.fit.sigma > 0.0)) {
        throw SegmentationError("cross-section fit did not converge; skip enhancement");
    }
    if (seg.fit.amplitude <= 3.0 * seg.fit.residual_rms) {
        throw SegmentationError(
            "fitted amplitude indistinguishable from residual noise; skip enhancement");
    }
    if (seg.fit.center < 0.0 || seg.fit.center > w - 1) {
        throw SegmentationError("fitted center left the crop; skip enhancement");
    }

    seg.center_x = seg.fit.center;
    // Refine the vertical position with the same fit through the center column.
    const int mid_col = static_cast<int>(std::llround(seg.center_x));
    std::vector<double> col(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y) col[static_cast<size_t>(y)] = cropped.at(mid_col, y);
    seg.center_y = mid_row;
    try {
        const GaussFit1D vfit = fit_gaussian_1d(col);
        if (vfit.converged && vfit.sigma > 0.0 && vfit.center >= 0.0 &&
            vfit.center <= h - 1) {
            seg.center_y = vfit.center;
        }
    } catch (const ValidationError&) {
        // keep the geometric crop center
    }

    seg.r_s = seg.fit.sigma * radius_factor(0.15);
    seg.r_e = seg.fit.sigma * radius_factor(0.01);
    seg.r_m = 0.5 * (seg.r_s + seg.r_e);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double r = std::hypot(x - seg.center_x, y - seg.center_y);
            const size_t idx = static_cast<size_t>(y) * w + x;
            if (r <= seg.r_s) {
                seg.mask_J.push_back(idx);
            } else if (r <= seg.r_e) {
                seg.mask_L.push_back(idx);
            } else {
                seg.mask_K.push_back(idx);
            }
        }
    }
    if (seg.mask_J.empty()) {
        throw SegmentationError("cloud core region is empty; skip enhancement");
    }
    if (seg.mask_K.size() < 10) {
        throw SegmentationError(
            "cloud fills the crop, background region too small; skip enhancement");
    }
    return seg;
}

} // namespace atomshadow
