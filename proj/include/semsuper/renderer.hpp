#pragma once

#include <cstdint>
#include <vector>

#include "semsuper/association.hpp"
#include "semsuper/image.hpp"
#include "semsuper/ssim.hpp"

namespace semsuper {

struct RenderConfig {
  double spread = 0.5;            // sigma_px = spread * fx * radius / z
  double z_soft = 0.005;          // meters, softness of the front-most weighting
  int window = 11;                // SSIM window
  Vec3 background = Vec3::Zero();
  double background_weight = 1e-3;  // pseudo-weight of the background in the blend
  int downsample = 2;             // render and compare at 1/downsample resolution
  bool dump_png = false;
};

struct RenderedImage {
  Image<double> color;     // H x W x 3
  Image<double> coverage;  // H x W, accumulated splat weight
};

// Per-pixel structure that the renderer treats as constant when
// differentiating: the front-most splat depth and the covered-pixel mask.
struct RenderContext {
  Grid<double> zmin;
  Grid<std::uint8_t> covered;
  double global_zmin = 0.0;  // reference for pixels no splat reached
};

// Gaussian soft splatting of every surfel at `positions` (camera frame)
// into an image of K.width x K.height. With `frozen` set the depth reference
// and covered mask are taken from it; otherwise they are computed and, if
// `context_out` is non-null, returned. Throws Error("nothing to render")
// when no surfel lies in front of the camera.
RenderedImage splat_render(const std::vector<Vec3>& positions, const std::vector<Surfel>& surfels,
                           const CameraIntrinsics& K, const RenderConfig& config,
                           const RenderContext* frozen = nullptr,
                           RenderContext* context_out = nullptr);

RenderedImage splat_render(const SceneView& scene, const DeformationParams& params,
                           const CameraIntrinsics& K, const RenderConfig& config);

// d loss / d position for every surfel, given d loss / d color. `context`
// must be the one used for the forward pass.
std::vector<Vec3> splat_backward(const std::vector<Vec3>& positions,
                                 const std::vector<Surfel>& surfels, const CameraIntrinsics& K,
                                 const RenderConfig& config, const RenderContext& context,
                                 const RenderedImage& rendered, const Image<double>& dloss_dcolor);

// Box-filter shrink by an integer factor (used for the render target).
Image<float> downsample_image(const Image<float>& img, int factor);

// Mean over covered pixels of ((1 - SSIM) / 2)^2 between the frame image and
// the rendering. Both must have the same size.
double render_loss(const Image<float>& frame_rgb, const RenderedImage& rendered, int window = 11);

// Pixel mask of coverage > 0.
Grid<std::uint8_t> coverage_mask(const RenderedImage& rendered);

}  // namespace semsuper
