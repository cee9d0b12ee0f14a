#pragma once

#include "gsalign/types.hpp"

#include <filesystem>

namespace gsalign {

/// Reads a binary PPM (P6, 8- or 16-bit) or PNG (8- or 16-bit, gray/RGB/palette, alpha
/// dropped). Sample v with maximum m maps to v / m.
Image read_image(const std::filesystem::path& path);

/// Writes by extension (.ppm or .png). Values are clamped to [0, 1] and rounded to the
/// nearest code of the given bit depth (8 or 16).
void write_image(const std::filesystem::path& path, const Image& image, int bit_depth = 8);

Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& image, int bit_depth = 8);
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image, int bit_depth = 8);

}  // namespace gsalign
