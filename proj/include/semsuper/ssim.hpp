#pragma once

#include <cstdint>
#include <vector>

#include "semsuper/image.hpp"

namespace semsuper {

inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

// Per-pixel, per-channel SSIM with a Gaussian window (sigma 1.5). Near the
// border the window is truncated and renormalized.
Image<double> ssim_map(const Image<double>& a, const Image<double>& b, int window = 11);

// Mean of ssim_map over pixels and channels.
double ssim(const Image<double>& a, const Image<double>& b, int window = 11);
double ssim(const Image<float>& a, const Image<float>& b, int window = 11);

Image<double> to_double(const Image<float>& img);

// Caches the window statistics of a fixed reference image so that the
// rendering loss and its gradient can be evaluated repeatedly against
// different candidate images.
class SsimReference {
 public:
  SsimReference(const Image<float>& reference, int window = 11);

  // Mean over masked pixels of ((1 - S) / 2)^2, where S is the channel-mean
  // SSIM between the reference and `image`. When `grad` is non-null it
  // receives d loss / d image (same layout as `image`). Returns 0 when the
  // mask is empty.
  double loss(const Image<double>& image, const Grid<std::uint8_t>& mask,
              Image<double>* grad = nullptr) const;

  int width() const { return ref_.width; }
  int height() const { return ref_.height; }

 private:
  Image<double> ref_;
  int window_;
  std::vector<double> taps_;
  Image<double> mu_;   // W * x
  Image<double> sq_;   // W * x^2
};

// Loss of `image` against `reference` with an explicit mask.
double render_loss(const Image<float>& reference, const Image<double>& image,
                   const Grid<std::uint8_t>& mask, int window = 11);

}  // namespace semsuper
