#include "atomshadow/image_io.hpp"

#include "atomshadow/errors.hpp"
#include "atomshadow/rng.hpp"

#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>

using namespace atomshadow;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() /
               ("atomshadow_test_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

ImageGrid float_valued_random(int w, int h, uint64_t seed) {
    ImageGrid image(w, h, 0.0);
    CounterRng rng(seed, 0);
    for (double& v : image.pixels) {
        v = static_cast<double>(static_cast<float>(rng.next_normal(0.0, 100.0)));
    }
    return image;
}

} // namespace

TEST_CASE("float binary round-trips bit-exactly with its sidecar") {
    TempDir dir;
    ImageGrid image = float_valued_random(23, 17, 5);
    image.pixel_pitch_um = 5.5;
    const fs::path path = dir.path / "grid.f32";
    save_image(image, path, ImageFormat::F32);
    const ImageGrid back = load_image(path, ImageFormat::F32);
    CHECK(back.width == image.width);
    CHECK(back.height == image.height);
    REQUIRE(back.pixel_pitch_um.has_value());
    CHECK(*back.pixel_pitch_um == 5.5);
    CHECK(back.pixels == image.pixels);
}

TEST_CASE("a 3x3 float grid survives the save/load cycle exactly") {
    TempDir dir;
    ImageGrid image(3, 3, 0.0);
    image.pixels = {0.0, 1.5, -2.25, 0.0009765625, 65535.0, -0.125, 3.0, 7.75, 42.0};
    const fs::path path = dir.path / "tiny.f32";
    save_image(image, path);
    CHECK(load_image(path).pixels == image.pixels);
}

TEST_CASE("sidecar validation names the missing key") {
    TempDir dir;
    const fs::path path = dir.path / "grid.f32";
    save_image(ImageGrid(4, 4, 1.0), path);
    std::ofstream meta(path.string() + ".json");
    meta << R"({"height": 4, "dtype": "f32le"})";
    meta.close();
    try {
        load_image(path);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("width") != std::string::npos);
    }
}

TEST_CASE("sidecar dimension overflow is rejected") {
    TempDir dir;
    const fs::path path = dir.path / "grid.f32";
    save_image(ImageGrid(4, 4, 1.0), path);
    std::ofstream meta(path.string() + ".json");
    meta << R"({"width": 1000000000, "height": 1000000000, "dtype": "f32le"})";
    meta.close();
    CHECK_THROWS_AS(load_image(path), IoError);
}

TEST_CASE("16-bit PNG keeps integer values, including the extremes") {
    TempDir dir;
    ImageGrid image(9, 7, 0.0);
    CounterRng rng(8, 8);
    for (double& v : image.pixels) v = static_cast<double>(rng.next_u64() % 65536);
    image.at(0, 0) = 65535.0;
    image.at(1, 0) = 0.0;
    const fs::path path = dir.path / "frame.png";
    save_image(image, path);
    const ImageGrid back = load_image(path);
    CHECK(back.pixels == image.pixels);
    CHECK(back.at(0, 0) == 65535.0);
}

TEST_CASE("PNG save quantizes: round then clamp") {
    TempDir dir;
    ImageGrid image(3, 1, 0.0);
    image.pixels = {12.6, -4.0, 70000.0};
    const fs::path path = dir.path / "q.png";
    save_image(image, path);
    const ImageGrid back = load_image(path);
    CHECK(back.pixels == std::vector<double>{13.0, 0.0, 65535.0});
}

TEST_CASE("16-bit TIFF round-trips through the little-endian writer") {
    TempDir dir;
    ImageGrid image(31, 12, 0.0);
    CounterRng rng(3, 1);
    for (double& v : image.pixels) v = static_cast<double>(rng.next_u64() % 65536);
    const fs::path path = dir.path / "frame.tif";
    save_image(image, path);
    const ImageGrid back = load_image(path);
    CHECK(back.pixels == image.pixels);
}

TEST_CASE("big-endian TIFF files read correctly") {
    TempDir dir;
    const fs::path path = dir.path / "mm.tif";
    // Hand-assembled 2x1 16-bit grayscale file in MM byte order.
    const uint8_t bytes[] = {
        'M', 'M', 0x00, 0x2a,       // byte order + magic
        0x00, 0x00, 0x00, 0x0c,     // IFD offset = 12
        0x12, 0x34, 0xab, 0xcd,     // pixel data: 0x1234, 0xabcd
        0x00, 0x08,                 // 8 entries
        0x01, 0x00, 0x00, 0x03, 0x00, 0x00, 0x00, 0x01, 0x00, 0x02, 0x00, 0x00, // width 2
        0x01, 0x01, 0x00, 0x03, 0x00, 0x00, 0x00, 0x01, 0x00, 0x01, 0x00, 0x00, // height 1
        0x01, 0x02, 0x00, 0x03, 0x00, 0x00, 0x00, 0x01, 0x00, 0x10, 0x00, 0x00, // bits 16
        0x01, 0x03, 0x00, 0x03, 0x00, 0x00, 0x00, 0x01, 0x00, 0x01, 0x00, 0x00, // comp 1
        0x01, 0x06, 0x00, 0x03, 0x00, 0x00, 0x00, 0x01, 0x00, 0x01, 0x00, 0x00, // photo 1
        0x01, 0x11, 0x00, 0x04, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x08, // strip off 8
        0x01, 0x15, 0x00, 0x03, 0x00, 0x00, 0x00, 0x01, 0x00, 0x01, 0x00, 0x00, // samples 1
        0x01, 0x17, 0x00, 0x04, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x04, // strip bytes 4
        0x00, 0x00, 0x00, 0x00,     // no next IFD
    };
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes), sizeof(bytes));
    out.close();
    const ImageGrid image = load_image(path);
    CHECK(image.width == 2);
    CHECK(image.height == 1);
    CHECK(image.at(0, 0) == static_cast<double>(0x1234));
    CHECK(image.at(1, 0) == static_cast<double>(0xabcd));
}

TEST_CASE("corrupt headers raise IoError with the path in the message") {
    TempDir dir;
    const fs::path path = dir.path / "junk.png";
    std::ofstream out(path, std::ios::binary);
    out << "this is not a png";
    out.close();
    try {
        load_image(path);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("junk.png") != std::string::npos);
    }

    const fs::path tif = dir.path / "junk.tif";
    std::ofstream t(tif, std::ios::binary);
    t << "XXXXXXXXXXX";
    t.close();
    CHECK_THROWS_AS(load_image(tif), IoError);
}

TEST_CASE("format detection by extension") {
    CHECK(format_from_extension("a.f32") == ImageFormat::F32);
    CHECK(format_from_extension("a.bin") == ImageFormat::F32);
    CHECK(format_from_extension("a.PNG") == ImageFormat::Png16);
    CHECK(format_from_extension("a.tiff") == ImageFormat::Tiff16);
    CHECK(format_from_extension("a.tif") == ImageFormat::Tiff16);
    CHECK_FALSE(format_from_extension("a.jpg").has_value());
    CHECK_THROWS_AS(load_image("noext"), IoError);
}
