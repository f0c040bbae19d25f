#include "semsuper/ssim.hpp"

#include <algorithm>
#include <cmath>

#include "semsuper/types.hpp"

namespace semsuper {

namespace {

std::vector<double> gaussian_taps(int window) {
  if (window < 1 || window % 2 == 0) throw Error("SSIM window must be a positive odd integer");
  const int r = window / 2;
  std::vector<double> t(window);
  double sum = 0.0;
  for (int k = 0; k < window; ++k) {
    const double d = k - r;
    t[k] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += t[k];
  }
  for (auto& x : t) x /= sum;
  return t;
}

// Sum of the taps that land inside [0, n) for every output position.
std::vector<double> tap_mass(const std::vector<double>& taps, int n) {
  const int r = static_cast<int>(taps.size()) / 2;
  std::vector<double> m(n, 0.0);
  for (int x = 0; x < n; ++x) {
    for (int k = 0; k < static_cast<int>(taps.size()); ++k) {
      const int s = x + k - r;
      if (s >= 0 && s < n) m[x] += taps[k];
    }
  }
  return m;
}

// Truncated, renormalized separable Gaussian filter and its adjoint.
class WindowFilter {
 public:
  WindowFilter(std::vector<double> taps, int width, int height)
      : taps_(std::move(taps)),
        width_(width),
        height_(height),
        row_mass_(tap_mass(taps_, width)),
        col_mass_(tap_mass(taps_, height)) {}

  Image<double> apply(const Image<double>& in) const {
    Image<double> tmp = pass(in, true, false);
    return pass(tmp, false, false);
  }

  Image<double> adjoint(const Image<double>& in) const {
    Image<double> tmp = pass(in, false, true);
    return pass(tmp, true, true);
  }

 private:
  Image<double> pass(const Image<double>& in, bool horizontal, bool transposed) const {
    const int C = in.channels;
    const int r = static_cast<int>(taps_.size()) / 2;
    const int n = horizontal ? width_ : height_;
    const std::vector<double>& mass = horizontal ? row_mass_ : col_mass_;
    Image<double> out(width_, height_, C, 0.0);
    std::vector<double> line(static_cast<std::size_t>(n) * C), res(static_cast<std::size_t>(n) * C);
    const int lines = horizontal ? height_ : width_;
    for (int l = 0; l < lines; ++l) {
      for (int x = 0; x < n; ++x) {
        const int u = horizontal ? x : l, v = horizontal ? l : x;
        const double scale = transposed ? 1.0 / mass[x] : 1.0;
        for (int c = 0; c < C; ++c) line[x * C + c] = in.at(u, v, c) * scale;
      }
      for (int x = 0; x < n; ++x) {
        const int lo = std::max(0, x - r), hi = std::min(n - 1, x + r);
        for (int c = 0; c < C; ++c) {
          double s = 0.0;
          for (int src = lo; src <= hi; ++src) s += taps_[src - x + r] * line[src * C + c];
          res[x * C + c] = transposed ? s : s / mass[x];
        }
      }
      for (int x = 0; x < n; ++x) {
        const int u = horizontal ? x : l, v = horizontal ? l : x;
        for (int c = 0; c < C; ++c) out.at(u, v, c) = res[x * C + c];
      }
    }
    return out;
  }

  std::vector<double> taps_;
  int width_, height_;
  std::vector<double> row_mass_, col_mass_;
};

Image<double> product(const Image<double>& a, const Image<double>& b) {
  Image<double> out(a.width, a.height, a.channels);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
  return out;
}

void check_same_shape(const Image<double>& a, const Image<double>& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw Error("SSIM: dimension mismatch");
  }
}

double ssim_value(double mx, double my, double exx, double eyy, double exy) {
  const double sxx = exx - mx * mx, syy = eyy - my * my, sxy = exy - mx * my;
  return ((2 * mx * my + kSsimC1) * (2 * sxy + kSsimC2)) /
         ((mx * mx + my * my + kSsimC1) * (sxx + syy + kSsimC2));
}

}  // namespace

Image<double> to_double(const Image<float>& img) {
  Image<double> out(img.width, img.height, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i];
  return out;
}

Image<double> ssim_map(const Image<double>& a, const Image<double>& b, int window) {
  check_same_shape(a, b);
  const WindowFilter filter(gaussian_taps(window), a.width, a.height);
  const Image<double> ma = filter.apply(a);
  const Image<double> mb = filter.apply(b);
  const Image<double> eaa = filter.apply(product(a, a));
  const Image<double> ebb = filter.apply(product(b, b));
  const Image<double> eab = filter.apply(product(a, b));
  Image<double> out(a.width, a.height, a.channels);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = ssim_value(ma.data[i], mb.data[i], eaa.data[i], ebb.data[i], eab.data[i]);
  }
  return out;
}

double ssim(const Image<float>& a, const Image<float>& b, int window) {
  return ssim(to_double(a), to_double(b), window);
}

double ssim(const Image<double>& a, const Image<double>& b, int window) {
  const Image<double> map = ssim_map(a, b, window);
  if (map.data.empty()) return 1.0;
  double sum = 0.0;
  for (double x : map.data) sum += x;
  return sum / static_cast<double>(map.data.size());
}

SsimReference::SsimReference(const Image<float>& reference, int window)
    : ref_(to_double(reference)), window_(window), taps_(gaussian_taps(window)) {
  const WindowFilter filter(taps_, ref_.width, ref_.height);
  mu_ = filter.apply(ref_);
  sq_ = filter.apply(product(ref_, ref_));
}

double SsimReference::loss(const Image<double>& image, const Grid<std::uint8_t>& mask,
                           Image<double>* grad) const {
  check_same_shape(ref_, image);
  if (mask.width != image.width || mask.height != image.height) {
    throw Error("render loss: mask dimension mismatch");
  }
  std::size_t count = 0;
  for (auto m : mask.data) count += m ? 1 : 0;
  if (grad) *grad = Image<double>(image.width, image.height, image.channels, 0.0);
  if (count == 0) return 0.0;

  const int C = image.channels;
  const WindowFilter filter(taps_, image.width, image.height);
  const Image<double> my = filter.apply(image);
  const Image<double> eyy = filter.apply(product(image, image));
  const Image<double> exy = filter.apply(product(ref_, image));

  Image<double> s_map(image.width, image.height, C);
  for (std::size_t i = 0; i < s_map.data.size(); ++i) {
    s_map.data[i] = ssim_value(mu_.data[i], my.data[i], sq_.data[i], eyy.data[i], exy.data[i]);
  }

  const double inv_count = 1.0 / static_cast<double>(count);
  double total = 0.0;
  Image<double> g_mu, g_yy, g_xy;
  if (grad) {
    g_mu = Image<double>(image.width, image.height, C, 0.0);
    g_yy = g_mu;
    g_xy = g_mu;
  }
  for (int v = 0; v < image.height; ++v) {
    for (int u = 0; u < image.width; ++u) {
      if (!mask(u, v)) continue;
      double s = 0.0;
      for (int c = 0; c < C; ++c) s += s_map.at(u, v, c);
      s /= C;
      const double h = 0.5 * (1.0 - s);
      total += h * h;
      if (!grad) continue;
      const double dl_ds = -h * inv_count / C;
      for (int c = 0; c < C; ++c) {
        const std::size_t i = s_map.index(u, v, c);
        const double mx = mu_.data[i], m_y = my.data[i];
        const double sxx = sq_.data[i] - mx * mx;
        const double syy = eyy.data[i] - m_y * m_y;
        const double sxy = exy.data[i] - mx * m_y;
        const double a1 = 2 * mx * m_y + kSsimC1, a2 = 2 * sxy + kSsimC2;
        const double b1 = mx * mx + m_y * m_y + kSsimC1, b2 = sxx + syy + kSsimC2;
        const double S = s_map.data[i];
        const double ds_dmu = 2 * mx * (a2 - a1) / (b1 * b2) - 2 * m_y * S * (1 / b1 - 1 / b2);
        g_mu.data[i] = dl_ds * ds_dmu;
        g_xy.data[i] = dl_ds * 2 * a1 / (b1 * b2);
        g_yy.data[i] = dl_ds * (-S / b2);
      }
    }
  }
  if (grad) {
    const Image<double> t_mu = filter.adjoint(g_mu);
    const Image<double> t_yy = filter.adjoint(g_yy);
    const Image<double> t_xy = filter.adjoint(g_xy);
    for (std::size_t i = 0; i < grad->data.size(); ++i) {
      grad->data[i] = t_mu.data[i] + 2.0 * image.data[i] * t_yy.data[i] + ref_.data[i] * t_xy.data[i];
    }
  }
  return total * inv_count;
}

double render_loss(const Image<float>& reference, const Image<double>& image,
                   const Grid<std::uint8_t>& mask, int window) {
  return SsimReference(reference, window).loss(image, mask);
}

}  // namespace semsuper
