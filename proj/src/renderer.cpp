#include "semsuper/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace semsuper {

namespace {

constexpr double kCutoffSigmas = 3.0;
const double kTailOffset = std::exp(-0.5 * kCutoffSigmas * kCutoffSigmas);
constexpr double kPixelVariance = 0.25;  // keeps tiny splats at least half a pixel wide
constexpr double kMinDepth = 1e-6;

// Gaussian minus its tangent at the cutoff (in d2 / 2 sigma^2), so the
// weight and its slope both vanish there. Non-negative by convexity.
double splat_weight(double r, double G) {
  return G - kTailOffset * (1.0 - r + 0.5 * kCutoffSigmas * kCutoffSigmas);
}

struct Footprint {
  double u = 0, v = 0, z = 0;
  double sigma0 = 0, sigma = 0;
  int u_lo = 0, u_hi = -1, v_lo = 0, v_hi = -1;
};

bool footprint(const Vec3& p, double radius, const CameraIntrinsics& K, const RenderConfig& cfg,
               Footprint& f) {
  if (p.z() <= kMinDepth) return false;
  f.z = p.z();
  f.u = K.fx * p.x() / p.z() + K.cx;
  f.v = K.fy * p.y() / p.z() + K.cy;
  f.sigma0 = cfg.spread * K.fx * radius / p.z();
  f.sigma = std::sqrt(f.sigma0 * f.sigma0 + kPixelVariance);
  const double reach = kCutoffSigmas * f.sigma;
  if (!std::isfinite(f.u) || !std::isfinite(f.v)) return false;
  if (f.u + reach < 0 || f.v + reach < 0 || f.u - reach > K.width - 1 ||
      f.v - reach > K.height - 1) {
    return false;
  }
  f.u_lo = std::max(0, static_cast<int>(std::ceil(f.u - reach)));
  f.u_hi = std::min(K.width - 1, static_cast<int>(std::floor(f.u + reach)));
  f.v_lo = std::max(0, static_cast<int>(std::ceil(f.v - reach)));
  f.v_hi = std::min(K.height - 1, static_cast<int>(std::floor(f.v + reach)));
  return true;
}

// Calls fn(x, y, d2, G) for every pixel strictly inside the cutoff circle,
// where G = exp(-d2 / 2 sigma^2).
template <typename Fn>
void for_each_pixel(const Footprint& f, Fn&& fn) {
  const double cutoff2 = kCutoffSigmas * kCutoffSigmas * f.sigma * f.sigma;
  const double inv2s2 = 1.0 / (2.0 * f.sigma * f.sigma);
  for (int y = f.v_lo; y <= f.v_hi; ++y) {
    const double dy = y - f.v;
    for (int x = f.u_lo; x <= f.u_hi; ++x) {
      const double dx = x - f.u;
      const double d2 = dx * dx + dy * dy;
      if (d2 >= cutoff2) continue;
      fn(x, y, d2, std::exp(-d2 * inv2s2));
    }
  }
}

void check_inputs(const std::vector<Vec3>& positions, const std::vector<Surfel>& surfels,
                  const CameraIntrinsics& K, const RenderConfig& cfg) {
  if (positions.size() != surfels.size()) throw Error("render: position/surfel count mismatch");
  if (surfels.empty()) throw Error("nothing to render");
  if (K.width <= 0 || K.height <= 0) throw Error("render: empty image");
  if (!(cfg.z_soft > 0.0)) throw Error("render: z_soft must be positive");
  if (!(cfg.background_weight > 0.0)) throw Error("render: background_weight must be positive");
}

// Depth reference for the front-most weighting at (x, y).
double reference_depth(const RenderContext& ctx, int x, int y) {
  const double z = ctx.zmin(x, y);
  return std::isfinite(z) ? z : ctx.global_zmin;
}

}  // namespace

RenderedImage splat_render(const std::vector<Vec3>& positions, const std::vector<Surfel>& surfels,
                           const CameraIntrinsics& K, const RenderConfig& cfg,
                           const RenderContext* frozen, RenderContext* context_out) {
  check_inputs(positions, surfels, K, cfg);
  const int W = K.width, H = K.height;

  std::vector<Footprint> fps(surfels.size());
  std::vector<char> visible(surfels.size(), 0);
  bool any_front = false;
  for (std::size_t i = 0; i < surfels.size(); ++i) {
    if (positions[i].z() > kMinDepth) any_front = true;
    visible[i] = footprint(positions[i], surfels[i].radius, K, cfg, fps[i]) ? 1 : 0;
  }
  if (!any_front) throw Error("nothing to render");

  RenderContext local;
  const RenderContext* ctx = frozen;
  if (!ctx) {
    const double inf = std::numeric_limits<double>::infinity();
    local.zmin = Grid<double>(W, H, inf);
    local.covered = Grid<std::uint8_t>(W, H, 0);
    local.global_zmin = inf;
    for (std::size_t i = 0; i < surfels.size(); ++i) {
      if (positions[i].z() > kMinDepth) local.global_zmin = std::min(local.global_zmin, positions[i].z());
      if (!visible[i]) continue;
      const Footprint& f = fps[i];
      for_each_pixel(f, [&](int x, int y, double, double) {
        double& z = local.zmin(x, y);
        z = std::min(z, f.z);
        local.covered(x, y) = 1;
      });
    }
    ctx = &local;
  } else if (ctx->zmin.width != W || ctx->zmin.height != H) {
    throw Error("render: context dimension mismatch");
  }

  RenderedImage out;
  out.color = Image<double>(W, H, 3, 0.0);
  out.coverage = Image<double>(W, H, 1, 0.0);
  for (std::size_t i = 0; i < surfels.size(); ++i) {
    if (!visible[i]) continue;
    const Footprint& f = fps[i];
    const Vec3& c = surfels[i].color;
    const double inv2s2 = 0.5 / (f.sigma * f.sigma);
    for_each_pixel(f, [&](int x, int y, double d2, double G) {
      const double a = splat_weight(d2 * inv2s2, G) *
                       std::exp(-(f.z - reference_depth(*ctx, x, y)) / cfg.z_soft);
      double* px = out.color.pixel(x, y);
      px[0] += a * c.x();
      px[1] += a * c.y();
      px[2] += a * c.z();
      out.coverage.at(x, y) += a;
    });
  }
  const double kappa = cfg.background_weight;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double denom = out.coverage.at(x, y) + kappa;
      double* px = out.color.pixel(x, y);
      for (int ch = 0; ch < 3; ++ch) px[ch] = (px[ch] + kappa * cfg.background[ch]) / denom;
    }
  }
  if (context_out) *context_out = frozen ? *frozen : std::move(local);
  return out;
}

RenderedImage splat_render(const SceneView& scene, const DeformationParams& params,
                           const CameraIntrinsics& K, const RenderConfig& config) {
  const DeformedScene deformed(scene, params);
  return splat_render(deformed.positions, scene.surfels, K, config);
}

std::vector<Vec3> splat_backward(const std::vector<Vec3>& positions,
                                 const std::vector<Surfel>& surfels, const CameraIntrinsics& K,
                                 const RenderConfig& cfg, const RenderContext& ctx,
                                 const RenderedImage& rendered,
                                 const Image<double>& dloss_dcolor) {
  check_inputs(positions, surfels, K, cfg);
  if (!dloss_dcolor.same_size(K.width, K.height) || dloss_dcolor.channels != 3) {
    throw Error("render backward: gradient dimension mismatch");
  }
  // d loss / d a for a unit splat weight at each pixel, per color channel
  // folded in below.
  const double kappa = cfg.background_weight;
  std::vector<Vec3> grad(surfels.size(), Vec3::Zero());
  for (std::size_t i = 0; i < surfels.size(); ++i) {
    Footprint f;
    if (!footprint(positions[i], surfels[i].radius, K, cfg, f)) continue;
    const Vec3& c = surfels[i].color;
    const double inv_s2 = 1.0 / (f.sigma * f.sigma);
    const double dsigma_dz = (f.sigma0 / f.sigma) * (-f.sigma0 / f.z);
    double du = 0, dv = 0, dz = 0;
    for_each_pixel(f, [&](int x, int y, double d2, double G) {
      const double* dc = dloss_dcolor.pixel(x, y);
      const double* col = rendered.color.pixel(x, y);
      const double denom = rendered.coverage.at(x, y) + kappa;
      const double dl_da =
          (dc[0] * (c.x() - col[0]) + dc[1] * (c.y() - col[1]) + dc[2] * (c.z() - col[2])) / denom;
      if (dl_da == 0.0) return;
      const double e = std::exp(-(f.z - reference_depth(ctx, x, y)) / cfg.z_soft);
      const double g = splat_weight(0.5 * d2 * inv_s2, G);
      const double slope = G - kTailOffset;
      du += dl_da * e * slope * (x - f.u) * inv_s2;
      dv += dl_da * e * slope * (y - f.v) * inv_s2;
      const double dg_dsigma = slope * d2 * inv_s2 / f.sigma;
      dz += dl_da * (e * dg_dsigma * dsigma_dz - g * e / cfg.z_soft);
    });
    const Vec3& p = positions[i];
    const Eigen::Matrix<double, 2, 3> J = project_jacobian(p, K);
    grad[i] = J.transpose() * Vec2(du, dv);
    grad[i].z() += dz;
  }
  return grad;
}

Image<float> downsample_image(const Image<float>& img, int factor) {
  if (factor < 1) throw Error("downsample factor must be >= 1");
  if (factor == 1) return img;
  const int W = img.width / factor, H = img.height / factor;
  if (W == 0 || H == 0) throw Error("downsample factor larger than image");
  Image<float> out(W, H, img.channels, 0.0f);
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        double s = 0.0;
        for (int dy = 0; dy < factor; ++dy) {
          for (int dx = 0; dx < factor; ++dx) s += img.at(x * factor + dx, y * factor + dy, c);
        }
        out.at(x, y, c) = static_cast<float>(s * inv);
      }
    }
  }
  return out;
}

Grid<std::uint8_t> coverage_mask(const RenderedImage& rendered) {
  Grid<std::uint8_t> mask(rendered.coverage.width, rendered.coverage.height, 0);
  for (std::size_t i = 0; i < mask.data.size(); ++i) mask.data[i] = rendered.coverage.data[i] > 0.0;
  return mask;
}

double render_loss(const Image<float>& frame_rgb, const RenderedImage& rendered, int window) {
  return render_loss(frame_rgb, rendered.color, coverage_mask(rendered), window);
}

}  // namespace semsuper
