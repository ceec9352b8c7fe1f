#include <algorithm>
#include <cmath>
#include <cstring>

#include <png.h>

#include "dmgnet/scene_data.hpp"

namespace dmgnet {

namespace fs = std::filesystem;

namespace {

void write_buffer(const fs::path& path, int width, int height, png_uint_32 format, const std::vector<std::uint8_t>& buf) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = format;
    if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr))
        throw std::runtime_error("cannot write PNG '" + path.string() + "': " + image.message);
}

std::vector<std::uint8_t> read_buffer(const fs::path& path, png_uint_32 format, int& width, int& height) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw std::runtime_error("cannot read PNG '" + path.string() + "': " + image.message);
    image.format = format;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&image);
        throw std::runtime_error("cannot decode PNG '" + path.string() + "': " + image.message);
    }
    width = static_cast<int>(image.width);
    height = static_cast<int>(image.height);
    return buf;
}

}  // namespace

void write_png(const RasterImage& image, const fs::path& path) {
    if (image.channels != 3 && image.channels != 1)
        throw std::invalid_argument("PNG export supports 1 or 3 channels");
    const std::size_t n = image.plane_size();
    std::vector<std::uint8_t> buf(n * image.channels);
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < image.channels; ++c) {
            const float v = std::clamp(image.pixels[c * n + i], 0.0f, 1.0f);
            buf[i * image.channels + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
        }
    write_buffer(path, image.width, image.height, image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY, buf);
}

void write_png(const GradeMap& labels, const fs::path& path) {
    for (auto code : labels.codes)
        if (code > kNumGrades && code != kUnclassified)
            throw std::invalid_argument("label map holds code " + std::to_string(code) + ": " + path.string());
    write_buffer(path, labels.width, labels.height, PNG_FORMAT_GRAY, labels.codes);
}

RasterImage read_png_image(const fs::path& path, double gsd) {
    int w = 0, h = 0;
    const auto buf = read_buffer(path, PNG_FORMAT_RGB, w, h);
    RasterImage img(w, h, 3, gsd);
    const std::size_t n = img.plane_size();
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) img.pixels[c * n + i] = static_cast<float>(buf[i * 3 + c]) / 255.0f;
    return img;
}

GradeMap read_png_labels(const fs::path& path) {
    int w = 0, h = 0;
    auto buf = read_buffer(path, PNG_FORMAT_GRAY, w, h);
    GradeMap m;
    m.width = w;
    m.height = h;
    m.codes = std::move(buf);
    for (std::uint8_t c : m.codes)
        if (c > kNumGrades && c != kUnclassified)
            throw std::runtime_error("label mask '" + path.string() + "' holds invalid code " + std::to_string(c));
    return m;
}

}  // namespace dmgnet
