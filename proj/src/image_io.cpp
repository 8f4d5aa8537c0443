#include "atomshadow/image_io.hpp"

#include "atomshadow/errors.hpp"

#include <nlohmann/json.hpp>
#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "image I/O assumes a little-endian host");

namespace atomshadow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr uint64_t kMaxPixels = 1ull << 28; // dimension-overflow guard

[[noreturn]] void io_fail(const fs::path& path, const std::string& detail) {
    throw IoError(path.string() + ": " + detail);
}

void check_dimensions(const fs::path& path, int64_t w, int64_t h) {
    if (w < 1 || h < 1 || static_cast<uint64_t>(w) * static_cast<uint64_t>(h) > kMaxPixels) {
        io_fail(path, "unreasonable image dimensions " + std::to_string(w) + "x" +
                          std::to_string(h));
    }
}

uint16_t quantize_u16(double v) {
    const double r = std::nearbyint(v);
    if (r <= 0.0) return 0;
    if (r >= 65535.0) return 65535;
    return static_cast<uint16_t>(r);
}

// ---------------------------------------------------------------- float32

fs::path sidecar_path(const fs::path& path) {
    fs::path p = path;
    p += ".json";
    return p;
}

void save_f32(const ImageGrid& image, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) io_fail(path, "cannot open for writing");
    std::vector<float> row(static_cast<size_t>(image.width));
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            row[static_cast<size_t>(x)] = static_cast<float>(image.at(x, y));
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) io_fail(path, "write failed");

    json sidecar = {
        {"width", image.width},
        {"height", image.height},
        {"pixel_pitch_um",
         image.pixel_pitch_um ? json(*image.pixel_pitch_um) : json(nullptr)},
        {"dtype", "f32le"},
    };
    std::ofstream meta(sidecar_path(path));
    if (!meta) io_fail(sidecar_path(path), "cannot open for writing");
    meta << sidecar.dump(2) << "\n";
}

ImageGrid load_f32(const fs::path& path) {
    const fs::path meta_path = sidecar_path(path);
    std::ifstream meta(meta_path);
    if (!meta) io_fail(meta_path, "missing JSON sidecar");
    json sidecar;
    try {
        meta >> sidecar;
    } catch (const json::exception& e) {
        io_fail(meta_path, std::string("sidecar is not valid JSON: ") + e.what());
    }
    for (const char* key : {"width", "height", "dtype"}) {
        if (!sidecar.contains(key)) {
            io_fail(meta_path, std::string("sidecar is missing key \"") + key + "\"");
        }
    }
    if (sidecar["dtype"] != "f32le") {
        io_fail(meta_path, "sidecar dtype must be \"f32le\"");
    }
    if (!sidecar["width"].is_number_integer() || !sidecar["height"].is_number_integer()) {
        io_fail(meta_path, "sidecar width/height must be integers");
    }
    const int64_t w = sidecar["width"].get<int64_t>();
    const int64_t h = sidecar["height"].get<int64_t>();
    check_dimensions(path, w, h);

    std::optional<double> pitch;
    if (sidecar.contains("pixel_pitch_um") && !sidecar["pixel_pitch_um"].is_null()) {
        pitch = sidecar["pixel_pitch_um"].get<double>();
    }

    std::ifstream in(path, std::ios::binary);
    if (!in) io_fail(path, "cannot open for reading");
    ImageGrid image(static_cast<int>(w), static_cast<int>(h), 0.0, pitch);
    std::vector<float> buffer(image.pixels.size());
    in.read(reinterpret_cast<char*>(buffer.data()),
            static_cast<std::streamsize>(buffer.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(buffer.size() * sizeof(float))) {
        io_fail(path, "file shorter than width*height float32 pixels");
    }
    for (size_t i = 0; i < buffer.size(); ++i) {
        image.pixels[i] = static_cast<double>(buffer[i]);
    }
    return image;
}

// ------------------------------------------------------------------- PNG

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

void save_png16(const ImageGrid& image, const fs::path& path) {
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
    if (!file) io_fail(path, "cannot open for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                              nullptr);
    if (!png) io_fail(path, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        io_fail(path, "png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        io_fail(path, "libpng write error");
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    // PNG stores 16-bit samples big-endian.
    std::vector<uint8_t> row(static_cast<size_t>(image.width) * 2);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const uint16_t v = quantize_u16(image.at(x, y));
            row[static_cast<size_t>(x) * 2] = static_cast<uint8_t>(v >> 8);
            row[static_cast<size_t>(x) * 2 + 1] = static_cast<uint8_t>(v & 0xff);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

ImageGrid load_png16(const fs::path& path) {
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
    if (!file) io_fail(path, "cannot open for reading");

    uint8_t signature[8];
    if (std::fread(signature, 1, 8, file.get()) != 8 ||
        png_sig_cmp(signature, 0, 8) != 0) {
        io_fail(path, "not a PNG file (bad signature)");
    }

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                             nullptr);
    if (!png) io_fail(path, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        io_fail(path, "png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        io_fail(path, "libpng read error (corrupt file)");
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || depth != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        io_fail(path, "expected 16-bit grayscale PNG, got depth " +
                          std::to_string(depth) + " color type " +
                          std::to_string(color));
    }
    check_dimensions(path, static_cast<int64_t>(w), static_cast<int64_t>(h));
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    ImageGrid image(static_cast<int>(w), static_cast<int>(h));
    std::vector<uint8_t> data(static_cast<size_t>(w) * h * 2);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) {
        rows[y] = data.data() + static_cast<size_t>(y) * w * 2;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    for (size_t i = 0; i < image.pixels.size(); ++i) {
        image.pixels[i] = static_cast<double>(
            (static_cast<uint16_t>(data[i * 2]) << 8) | data[i * 2 + 1]);
    }
    return image;
}

// ------------------------------------------------------------------ TIFF
//
// Hand-rolled baseline subset: single image, uncompressed, 16-bit single
// sample grayscale. Covers what this pipeline writes plus strip-split
// files from other writers; both byte orders are accepted on read.

void put_u16(std::vector<uint8_t>& buf, uint16_t v) {
    buf.push_back(static_cast<uint8_t>(v & 0xff));
    buf.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
    put_u16(buf, static_cast<uint16_t>(v & 0xffff));
    put_u16(buf, static_cast<uint16_t>(v >> 16));
}

void put_ifd_entry(std::vector<uint8_t>& buf, uint16_t tag, uint16_t type,
                   uint32_t count, uint32_t value) {
    put_u16(buf, tag);
    put_u16(buf, type);
    put_u32(buf, count);
    if (type == 3 && count == 1) { // SHORT packs into the low half
        put_u16(buf, static_cast<uint16_t>(value));
        put_u16(buf, 0);
    } else {
        put_u32(buf, value);
    }
}

void save_tiff16(const ImageGrid& image, const fs::path& path) {
    const uint32_t w = static_cast<uint32_t>(image.width);
    const uint32_t h = static_cast<uint32_t>(image.height);
    const uint32_t strip_bytes = w * h * 2;
    const uint32_t data_offset = 8;
    const uint32_t ifd_offset = data_offset + strip_bytes;

    std::vector<uint8_t> buf;
    buf.reserve(ifd_offset + 2 + 9 * 12 + 4);
    buf.push_back('I');
    buf.push_back('I');
    put_u16(buf, 42);
    put_u32(buf, ifd_offset);
    for (size_t i = 0; i < image.pixels.size(); ++i) {
        put_u16(buf, quantize_u16(image.pixels[i]));
    }

    put_u16(buf, 9); // entry count
    put_ifd_entry(buf, 256, 4, 1, w);           // ImageWidth
    put_ifd_entry(buf, 257, 4, 1, h);           // ImageLength
    put_ifd_entry(buf, 258, 3, 1, 16);          // BitsPerSample
    put_ifd_entry(buf, 259, 3, 1, 1);           // Compression: none
    put_ifd_entry(buf, 262, 3, 1, 1);           // Photometric: BlackIsZero
    put_ifd_entry(buf, 273, 4, 1, data_offset); // StripOffsets
    put_ifd_entry(buf, 277, 3, 1, 1);           // SamplesPerPixel
    put_ifd_entry(buf, 278, 4, 1, h);           // RowsPerStrip
    put_ifd_entry(buf, 279, 4, 1, strip_bytes); // StripByteCounts
    put_u32(buf, 0); // no next IFD

    std::ofstream out(path, std::ios::binary);
    if (!out) io_fail(path, "cannot open for writing");
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!out) io_fail(path, "write failed");
}

class TiffReader {
public:
    TiffReader(const fs::path& path, std::vector<uint8_t> bytes)
        : path_(path), bytes_(std::move(bytes)) {}

    ImageGrid read() {
        if (bytes_.size() < 8) io_fail(path_, "truncated TIFF header");
        if (bytes_[0] == 'I' && bytes_[1] == 'I') {
            big_endian_ = false;
        } else if (bytes_[0] == 'M' && bytes_[1] == 'M') {
            big_endian_ = true;
        } else {
            io_fail(path_, "not a TIFF file (bad byte-order mark)");
        }
        if (u16_at(2) != 42) io_fail(path_, "not a TIFF file (bad magic)");
        parse_ifd(u32_at(4));

        check_dimensions(path_, width_, height_);
        if (bits_ != 16) io_fail(path_, "expected 16-bit samples, got " +
                                            std::to_string(bits_));
        if (samples_ != 1) io_fail(path_, "expected single-sample grayscale");
        if (compression_ != 1) io_fail(path_, "only uncompressed TIFF is supported");
        if (photometric_ > 1) io_fail(path_, "only grayscale TIFF is supported");
        if (strip_offsets_.size() != strip_counts_.size()) {
            io_fail(path_, "strip offset/count tables disagree");
        }

        ImageGrid image(static_cast<int>(width_), static_cast<int>(height_));
        const size_t total_bytes = static_cast<size_t>(width_) * height_ * 2;
        size_t written = 0;
        std::vector<uint8_t> raw(total_bytes);
        for (size_t s = 0; s < strip_offsets_.size(); ++s) {
            const uint64_t off = strip_offsets_[s];
            const uint64_t cnt = strip_counts_[s];
            if (off + cnt > bytes_.size() || written + cnt > total_bytes) {
                io_fail(path_, "strip data out of bounds");
            }
            std::memcpy(raw.data() + written, bytes_.data() + off, cnt);
            written += cnt;
        }
        if (written != total_bytes) io_fail(path_, "pixel data incomplete");
        for (size_t i = 0; i < image.pixels.size(); ++i) {
            const uint16_t lo = raw[i * 2];
            const uint16_t hi = raw[i * 2 + 1];
            image.pixels[i] = static_cast<double>(
                big_endian_ ? static_cast<uint16_t>((lo << 8) | hi)
                            : static_cast<uint16_t>((hi << 8) | lo));
        }
        return image;
    }

private:
    uint16_t u16_at(size_t pos) const {
        if (pos + 2 > bytes_.size()) io_fail(path_, "truncated TIFF data");
        return big_endian_
                   ? static_cast<uint16_t>((bytes_[pos] << 8) | bytes_[pos + 1])
                   : static_cast<uint16_t>((bytes_[pos + 1] << 8) | bytes_[pos]);
    }

    uint32_t u32_at(size_t pos) const {
        if (pos + 4 > bytes_.size()) io_fail(path_, "truncated TIFF data");
        const uint32_t b0 = bytes_[pos], b1 = bytes_[pos + 1];
        const uint32_t b2 = bytes_[pos + 2], b3 = bytes_[pos + 3];
        return big_endian_ ? (b0 << 24) | (b1 << 16) | (b2 << 8) | b3
                           : (b3 << 24) | (b2 << 16) | (b1 << 8) | b0;
    }

    std::vector<uint64_t> read_values(uint16_t type, uint32_t count, size_t entry_pos) {
        const size_t type_size = type == 3 ? 2 : 4;
        if (type != 3 && type != 4) {
            io_fail(path_, "unsupported TIFF field type " + std::to_string(type));
        }
        const size_t total = type_size * count;
        const size_t pos = total <= 4 ? entry_pos + 8 : u32_at(entry_pos + 8);
        std::vector<uint64_t> values(count);
        for (uint32_t i = 0; i < count; ++i) {
            values[i] = type == 3 ? u16_at(pos + 2 * i) : u32_at(pos + 4 * i);
        }
        return values;
    }

    void parse_ifd(uint32_t offset) {
        const uint16_t n = u16_at(offset);
        for (uint16_t i = 0; i < n; ++i) {
            const size_t entry = offset + 2 + static_cast<size_t>(i) * 12;
            const uint16_t tag = u16_at(entry);
            const uint16_t type = u16_at(entry + 2);
            const uint32_t count = u32_at(entry + 4);
            switch (tag) {
            case 256: width_ = static_cast<int64_t>(read_values(type, 1, entry)[0]); break;
            case 257: height_ = static_cast<int64_t>(read_values(type, 1, entry)[0]); break;
            case 258: bits_ = static_cast<int>(read_values(type, 1, entry)[0]); break;
            case 259: compression_ = static_cast<int>(read_values(type, 1, entry)[0]); break;
            case 262: photometric_ = static_cast<int>(read_values(type, 1, entry)[0]); break;
            case 273: strip_offsets_ = read_values(type, count, entry); break;
            case 277: samples_ = static_cast<int>(read_values(type, 1, entry)[0]); break;
            case 279: strip_counts_ = read_values(type, count, entry); break;
            default: break; // unknown tags are ignored
            }
        }
    }

    const fs::path& path_;
    std::vector<uint8_t> bytes_;
    bool big_endian_ = false;
    int64_t width_ = 0;
    int64_t height_ = 0;
    int bits_ = 0;
    int samples_ = 1;
    int compression_ = 1;
    int photometric_ = 1;
    std::vector<uint64_t> strip_offsets_;
    std::vector<uint64_t> strip_counts_;
};

ImageGrid load_tiff16(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) io_fail(path, "cannot open for reading");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return TiffReader(path, std::move(bytes)).read();
}

} // namespace

std::optional<ImageFormat> format_from_extension(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".f32" || ext == ".bin") return ImageFormat::F32;
    if (ext == ".png") return ImageFormat::Png16;
    if (ext == ".tif" || ext == ".tiff") return ImageFormat::Tiff16;
    return std::nullopt;
}

ImageGrid load_image(const fs::path& path, ImageFormat format) {
    switch (format) {
    case ImageFormat::F32: return load_f32(path);
    case ImageFormat::Png16: return load_png16(path);
    case ImageFormat::Tiff16: return load_tiff16(path);
    }
    io_fail(path, "unknown image format");
}

ImageGrid load_image(const fs::path& path) {
    const auto format = format_from_extension(path);
    if (!format) io_fail(path, "cannot infer image format from extension");
    return load_image(path, *format);
}

void save_image(const ImageGrid& image, const fs::path& path, ImageFormat format) {
    require_valid(image, "save_image input");
    switch (format) {
    case ImageFormat::F32: save_f32(image, path); return;
    case ImageFormat::Png16: save_png16(image, path); return;
    case ImageFormat::Tiff16: save_tiff16(image, path); return;
    }
    io_fail(path, "unknown image format");
}

void save_image(const ImageGrid& image, const fs::path& path) {
    const auto format = format_from_extension(path);
    if (!format) io_fail(path, "cannot infer image format from extension");
    save_image(image, path, *format);
}

} // namespace atomshadow
