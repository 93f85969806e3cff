#include "pipeunroll/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

namespace pipeunroll {

namespace {

struct FileCloser {
    void operator()(std::FILE *f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path &path, const char *mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw IoError("cannot open " + path.string());
    return f;
}

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngWriter() {
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (png) info = png_create_info_struct(png);
        if (!png || !info) throw IoError("libpng init failed");
    }
    ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngReader() {
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (png) info = png_create_info_struct(png);
        if (!png || !info) throw IoError("libpng init failed");
    }
    ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

}  // namespace

void write_png_rgb8(const std::filesystem::path &path, const ColorImage &img) {
    if (img.empty()) throw std::invalid_argument("write_png_rgb8: empty image");
    auto f = open_file(path, "wb");
    PngWriter w;
    if (setjmp(png_jmpbuf(w.png))) throw IoError("png write failed: " + path.string());
    png_init_io(w.png, f.get());
    png_set_compression_level(w.png, 6);
    png_set_IHDR(w.png, w.info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);

    std::vector<std::uint8_t> row(static_cast<size_t>(img.width) * 3);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            const Pixel &p = img.at(r, c);
            row[3 * c + 0] = to_byte(p[0]);
            row[3 * c + 1] = to_byte(p[1]);
            row[3 * c + 2] = to_byte(p[2]);
        }
        png_write_row(w.png, row.data());
    }
    png_write_end(w.png, nullptr);
}

void write_png_rgb8(const std::filesystem::path &path, const ColorImageD &img) {
    ColorImage bytes(img.width, img.height);
    for (size_t i = 0; i < img.data.size(); ++i)
        bytes.data[i] = {static_cast<float>(img.data[i][0]), static_cast<float>(img.data[i][1]),
                         static_cast<float>(img.data[i][2])};
    write_png_rgb8(path, bytes);
}

ColorImage read_png_rgb8(const std::filesystem::path &path) {
    auto f = open_file(path, "rb");
    PngReader rd;
    if (setjmp(png_jmpbuf(rd.png))) throw IoError("png read failed: " + path.string());
    png_init_io(rd.png, f.get());
    png_read_info(rd.png, rd.info);

    png_uint_32 width = png_get_image_width(rd.png, rd.info);
    png_uint_32 height = png_get_image_height(rd.png, rd.info);

    // Normalize any input to 8-bit RGB.
    png_set_expand(rd.png);
    png_set_strip_16(rd.png);
    png_set_strip_alpha(rd.png);
    png_set_gray_to_rgb(rd.png);
    png_read_update_info(rd.png, rd.info);
    if (png_get_channels(rd.png, rd.info) != 3)
        throw IoError("unexpected channel count in " + path.string());

    ColorImage img(static_cast<int>(width), static_cast<int>(height));
    std::vector<std::uint8_t> row(static_cast<size_t>(width) * 3);
    for (png_uint_32 r = 0; r < height; ++r) {
        png_read_row(rd.png, row.data(), nullptr);
        for (png_uint_32 c = 0; c < width; ++c) {
            img.at(r, c) = {static_cast<float>(row[3 * c + 0]), static_cast<float>(row[3 * c + 1]),
                            static_cast<float>(row[3 * c + 2])};
        }
    }
    png_read_end(rd.png, nullptr);
    return img;
}

void write_png_palette(const std::filesystem::path &path, const Mask &mask,
                       const std::vector<std::array<std::uint8_t, 3>> &palette) {
    if (mask.empty()) throw std::invalid_argument("write_png_palette: empty mask");
    if (palette.empty() || palette.size() > 256)
        throw std::invalid_argument("write_png_palette: palette size out of range");
    for (auto v : mask.data)
        if (v >= palette.size()) throw std::invalid_argument("write_png_palette: index beyond palette");

    auto f = open_file(path, "wb");
    PngWriter w;
    if (setjmp(png_jmpbuf(w.png))) throw IoError("png write failed: " + path.string());
    png_init_io(w.png, f.get());
    png_set_compression_level(w.png, 6);
    png_set_IHDR(w.png, w.info, mask.width, mask.height, 8, PNG_COLOR_TYPE_PALETTE,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    std::vector<png_color> colors(palette.size());
    for (size_t i = 0; i < palette.size(); ++i)
        colors[i] = {palette[i][0], palette[i][1], palette[i][2]};
    png_set_PLTE(w.png, w.info, colors.data(), static_cast<int>(colors.size()));
    png_write_info(w.png, w.info);

    for (int r = 0; r < mask.height; ++r)
        png_write_row(w.png, const_cast<png_bytep>(&mask.data[static_cast<size_t>(r) * mask.width]));
    png_write_end(w.png, nullptr);
}

Mask read_png_palette(const std::filesystem::path &path) {
    auto f = open_file(path, "rb");
    PngReader rd;
    if (setjmp(png_jmpbuf(rd.png))) throw IoError("png read failed: " + path.string());
    png_init_io(rd.png, f.get());
    png_read_info(rd.png, rd.info);

    if (png_get_color_type(rd.png, rd.info) != PNG_COLOR_TYPE_PALETTE)
        throw IoError("not a palette PNG: " + path.string());
    png_set_packing(rd.png);  // expand sub-byte indices to one byte each
    png_read_update_info(rd.png, rd.info);

    png_uint_32 width = png_get_image_width(rd.png, rd.info);
    png_uint_32 height = png_get_image_height(rd.png, rd.info);
    Mask mask(static_cast<int>(width), static_cast<int>(height));
    for (png_uint_32 r = 0; r < height; ++r)
        png_read_row(rd.png, &mask.data[static_cast<size_t>(r) * width], nullptr);
    png_read_end(rd.png, nullptr);
    return mask;
}

}  // namespace pipeunroll
