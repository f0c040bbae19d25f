#include "semsuper/png_io.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include <png.h>

#include "semsuper/types.hpp"

namespace semsuper {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw Error("cannot open file: " + path.string());
  return f;
}

struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<png_byte> bytes;  // rows packed, 16-bit samples big-endian
};

DecodedPng decode(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error("not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("libpng init failed");
  }
  DecodedPng out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("corrupt PNG file: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.bytes.resize(stride * out.height);
  rows.resize(out.height);
  for (int v = 0; v < out.height; ++v) rows[v] = out.bytes.data() + stride * v;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void encode(const std::filesystem::path& path, int width, int height, int color_type,
            int bit_depth, const std::vector<png_byte>& bytes) {
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng init failed");
  }
  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("failed writing PNG file: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = bytes.size() / height;
  for (int v = 0; v < height; ++v) rows[v] = const_cast<png_bytep>(bytes.data() + stride * v);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Image<float> read_png_rgb(const std::filesystem::path& path) {
  const DecodedPng png = decode(path);
  Image<float> img(png.width, png.height, 3);
  const int bytes_per_sample = png.bit_depth == 16 ? 2 : 1;
  const double scale = png.bit_depth == 16 ? 65535.0 : 255.0;
  const std::size_t stride = png.bytes.size() / png.height;
  for (int v = 0; v < png.height; ++v) {
    for (int u = 0; u < png.width; ++u) {
      const png_byte* px =
          png.bytes.data() + stride * v + static_cast<std::size_t>(u) * png.channels * bytes_per_sample;
      auto sample = [&](int c) {
        const png_byte* s = px + c * bytes_per_sample;
        const unsigned value = bytes_per_sample == 2 ? (s[0] << 8) | s[1] : s[0];
        return static_cast<float>(value / scale);
      };
      for (int c = 0; c < 3; ++c) {
        // Gray and gray+alpha replicate the single intensity channel.
        img.at(u, v, c) = png.channels >= 3 ? sample(c) : sample(0);
      }
    }
  }
  return img;
}

Image<std::uint16_t> read_png_gray16(const std::filesystem::path& path) {
  const DecodedPng png = decode(path);
  if (png.channels != 1) throw Error("expected single-channel PNG: " + path.string());
  Image<std::uint16_t> img(png.width, png.height, 1);
  const std::size_t stride = png.bytes.size() / png.height;
  for (int v = 0; v < png.height; ++v) {
    const png_byte* row = png.bytes.data() + stride * v;
    for (int u = 0; u < png.width; ++u) {
      img.at(u, v) = png.bit_depth == 16
                         ? static_cast<std::uint16_t>((row[2 * u] << 8) | row[2 * u + 1])
                         : row[u];
    }
  }
  return img;
}

void write_png_rgb(const std::filesystem::path& path, const Image<float>& rgb) {
  if (rgb.channels != 3) throw Error("write_png_rgb expects 3 channels");
  std::vector<png_byte> bytes(rgb.pixel_count() * 3);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const float x = std::clamp(rgb.data[i], 0.0f, 1.0f);
    bytes[i] = static_cast<png_byte>(std::lround(x * 255.0f));
  }
  encode(path, rgb.width, rgb.height, PNG_COLOR_TYPE_RGB, 8, bytes);
}

void write_png_gray16(const std::filesystem::path& path, const Image<std::uint16_t>& gray) {
  std::vector<png_byte> bytes(gray.pixel_count() * 2);
  for (std::size_t i = 0; i < gray.pixel_count(); ++i) {
    bytes[2 * i] = static_cast<png_byte>(gray.data[i] >> 8);
    bytes[2 * i + 1] = static_cast<png_byte>(gray.data[i] & 0xff);
  }
  encode(path, gray.width, gray.height, PNG_COLOR_TYPE_GRAY, 16, bytes);
}

}  // namespace semsuper
