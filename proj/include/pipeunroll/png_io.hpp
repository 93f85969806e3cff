#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "pipeunroll/errors.hpp"
#include "pipeunroll/image.hpp"

namespace pipeunroll {

// 8-bit RGB PNG. Values are rounded and clamped to [0, 255] on write.
void write_png_rgb8(const std::filesystem::path &path, const ColorImage &img);
void write_png_rgb8(const std::filesystem::path &path, const ColorImageD &img);
ColorImage read_png_rgb8(const std::filesystem::path &path);

// Palette-indexed PNG for label masks. Pixel values are raw palette indices;
// the palette maps each class code to a display color.
void write_png_palette(const std::filesystem::path &path, const Mask &mask,
                       const std::vector<std::array<std::uint8_t, 3>> &palette);
Mask read_png_palette(const std::filesystem::path &path);

}  // namespace pipeunroll
