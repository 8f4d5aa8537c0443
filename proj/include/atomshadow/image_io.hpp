#pragma once

#include "atomshadow/image.hpp"

#include <filesystem>
#include <optional>

namespace atomshadow {

enum class ImageFormat {
    F32,    // flat little-endian float32 + JSON sidecar (<path>.json)
    Png16,  // 16-bit grayscale PNG
    Tiff16, // 16-bit grayscale uncompressed TIFF
};

/// Format by extension: .f32 / .bin, .png, .tif / .tiff.
std::optional<ImageFormat> format_from_extension(const std::filesystem::path& path);

ImageGrid load_image(const std::filesystem::path& path, ImageFormat format);
ImageGrid load_image(const std::filesystem::path& path);

/// Integer formats quantize with round + clamp to [0, 65535]; the float
/// binary preserves float32 values exactly.
void save_image(const ImageGrid& image, const std::filesystem::path& path,
                ImageFormat format);
void save_image(const ImageGrid& image, const std::filesystem::path& path);

} // namespace atomshadow
