#pragma once

#include <cstddef>
#include <vector>

namespace semsuper {

// Row-major H x W grid with C interleaved channels per pixel.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t index(int u, int v, int c = 0) const {
    return (static_cast<std::size_t>(v) * width + u) * channels + c;
  }
  T& at(int u, int v, int c = 0) { return data[index(u, v, c)]; }
  const T& at(int u, int v, int c = 0) const { return data[index(u, v, c)]; }
  T* pixel(int u, int v) { return data.data() + index(u, v); }
  const T* pixel(int u, int v) const { return data.data() + index(u, v); }

  bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
  bool same_size(int w, int h) const { return width == w && height == h; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool empty() const { return data.empty(); }
};

// Single-channel dense grid of arbitrary payload (points, normals, masks).
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, T fill = T{})
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& operator()(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
  const T& operator()(int u, int v) const {
    return data[static_cast<std::size_t>(v) * width + u];
  }
  bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
};

}  // namespace semsuper
