#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pipeunroll {

// Row-major 2D grid. Rows index the first coordinate, columns the second.
template <typename T>
struct Grid {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Grid() = default;
    Grid(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {
        if (w < 0 || h < 0) throw std::invalid_argument("Grid: negative dimensions");
    }

    bool empty() const { return width == 0 || height == 0; }
    size_t size() const { return data.size(); }

    T &at(int row, int col) { return data[static_cast<size_t>(row) * width + col]; }
    const T &at(int row, int col) const { return data[static_cast<size_t>(row) * width + col]; }

    bool in_bounds(int row, int col) const {
        return row >= 0 && row < height && col >= 0 && col < width;
    }

    bool operator==(const Grid &o) const {
        return width == o.width && height == o.height && data == o.data;
    }
};

using Pixel = std::array<float, 3>;
using PixelD = std::array<double, 3>;

// Single-channel float image, values nominally in [0, 255].
using Image = Grid<float>;
// Interleaved RGB float image, values nominally in [0, 255].
using ColorImage = Grid<Pixel>;
// Double-precision RGB image for solver outputs.
using ColorImageD = Grid<PixelD>;
// Per-pixel class codes or validity flags.
using Mask = Grid<std::uint8_t>;

inline float luminance(const Pixel &p) { return (p[0] + p[1] + p[2]) / 3.0f; }
inline double luminance(const PixelD &p) { return (p[0] + p[1] + p[2]) / 3.0; }

Image to_gray(const ColorImage &img);

// Bilinear sample at continuous (x, y) = (column, row). Coordinates are
// clamped to the image border.
float sample_bilinear(const Image &img, double x, double y);
Pixel sample_bilinear(const ColorImage &img, double x, double y);

// Separable Gaussian low-pass. The kernel is truncated at 3 sigma and
// renormalized near the border so constant and linear signals are preserved
// in the interior. Pixels where valid == 0 carry zero weight; if a valid
// mask is given, fully-invalid neighborhoods stay at their input value.
Image gaussian_blur(const Image &img, double sigma, const Mask *valid = nullptr);

// Same filter with double-precision accumulation and output, for the fits
// that need it.
Grid<double> gaussian_blur_double(const Image &img, double sigma, const Mask *valid = nullptr);

std::uint8_t to_byte(float v);

}  // namespace pipeunroll
