#include "semsuper/observation.hpp"

#include <array>
#include <cmath>

#include "semsuper/deformation.hpp"

namespace semsuper {

namespace {

// Counter-clockwise around the pixel in image coordinates.
constexpr std::array<std::array<int, 2>, 8> kRing = {{
    {1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}}};

}  // namespace

PointMap backproject(const Image<float>& depth, const CameraIntrinsics& K) {
  PointMap out{Grid<Vec3>(depth.width, depth.height, Vec3::Zero()),
               Grid<std::uint8_t>(depth.width, depth.height, 0)};
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const double d = depth.at(u, v);
      if (!(d > 0.0) || !std::isfinite(d)) continue;
      out.points(u, v) = backproject_pixel(u, v, d, K);
      out.valid(u, v) = 1;
    }
  }
  return out;
}

ObservationMaps estimate_normals(const PointMap& pm) {
  const int W = pm.points.width, H = pm.points.height;
  ObservationMaps out{pm.points, Grid<Vec3>(W, H, Vec3::Zero()), Grid<std::uint8_t>(W, H, 0)};
  for (int v = 1; v + 1 < H; ++v) {
    for (int u = 1; u + 1 < W; ++u) {
      if (!pm.valid(u, v)) continue;
      bool complete = true;
      for (const auto& o : kRing) complete = complete && pm.valid(u + o[0], v + o[1]);
      if (!complete) continue;

      const Vec3& c = pm.points(u, v);
      Vec3 sum = Vec3::Zero();
      for (std::size_t k = 0; k < kRing.size(); ++k) {
        const auto& a = kRing[k];
        const auto& b = kRing[(k + 1) % kRing.size()];
        const Vec3 da = pm.points(u + a[0], v + a[1]) - c;
        const Vec3 db = pm.points(u + b[0], v + b[1]) - c;
        sum += da.cross(db);
      }
      const double norm = sum.norm();
      if (!(norm > 0.0) || !std::isfinite(norm)) continue;
      Vec3 n = sum / norm;
      if (n.dot(c) > 0.0) n = -n;
      out.normals(u, v) = n;
      out.valid(u, v) = 1;
    }
  }
  return out;
}

ObservationMaps observe(const Frame& frame) {
  return estimate_normals(backproject(frame.depth, frame.intrinsics));
}

}  // namespace semsuper
