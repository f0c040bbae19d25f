#pragma once

#include <cstdint>
#include <filesystem>

#include "semsuper/image.hpp"

namespace semsuper {

// 8-bit RGB(A) or grayscale PNG, returned as 3-channel values in [0, 1].
Image<float> read_png_rgb(const std::filesystem::path& path);
// 16-bit (or 8-bit) single-channel PNG, raw integer values.
Image<std::uint16_t> read_png_gray16(const std::filesystem::path& path);

// Values are clamped to [0, 1] and rounded to 8 bits.
void write_png_rgb(const std::filesystem::path& path, const Image<float>& rgb);
void write_png_gray16(const std::filesystem::path& path, const Image<std::uint16_t>& gray);

}  // namespace semsuper
