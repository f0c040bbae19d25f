#include "semsuper/types.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

namespace semsuper {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error("invalid intrinsics: focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error("invalid intrinsics: image size must be positive");
  }
  if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height) {
    throw Error("invalid intrinsics: principal point outside the image");
  }
}

CameraIntrinsics CameraIntrinsics::downsampled(int factor) const {
  if (factor <= 1) return *this;
  const double s = 1.0 / factor;
  CameraIntrinsics out;
  out.fx = fx * s;
  out.fy = fy * s;
  // Pixel (u, v) of the small image averages the full-resolution block
  // [u*f, u*f + f - 1], so its center sits at u*f + (f - 1) / 2.
  out.cx = (cx - 0.5 * (factor - 1)) * s;
  out.cy = (cy - 0.5 * (factor - 1)) * s;
  out.width = width / factor;
  out.height = height / factor;
  return out;
}

bool EDGraph::has_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  return std::find(edges.begin(), edges.end(), std::make_pair(a, b)) != edges.end();
}

void EDGraph::add_edge(int a, int b) {
  if (a == b) return;
  if (a > b) std::swap(a, b);
  if (!has_edge(a, b)) edges.emplace_back(a, b);
}

void EDGraph::refresh_rest_areas() {
  for (auto& tri : triangles) {
    tri.rest_area = triangle_area(nodes[tri.nodes[0]].rest, nodes[tri.nodes[1]].rest,
                                  nodes[tri.nodes[2]].rest);
  }
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

DeformationParams DeformationParams::identity(std::size_t node_count) {
  DeformationParams p;
  p.node_rotation.assign(node_count, Vec4(1, 0, 0, 0));
  p.node_translation.assign(node_count, Vec3::Zero());
  return p;
}

VecX DeformationParams::flatten() const {
  VecX flat(size());
  for (std::size_t j = 0; j < node_count(); ++j) {
    flat.segment<4>(rotation_offset(j)) = node_rotation[j];
    flat.segment<3>(translation_offset(j)) = node_translation[j];
  }
  flat.segment<4>(global_rotation_offset()) = global_rotation;
  flat.segment<3>(global_translation_offset()) = global_translation;
  return flat;
}

DeformationParams DeformationParams::unflatten(const VecX& flat) {
  if (flat.size() % 7 != 0 || flat.size() < 7) {
    throw Error("parameter vector length must be a positive multiple of 7");
  }
  const std::size_t n = static_cast<std::size_t>(flat.size()) / 7 - 1;
  DeformationParams p = identity(n);
  for (std::size_t j = 0; j < n; ++j) {
    p.node_rotation[j] = flat.segment<4>(rotation_offset(j));
    p.node_translation[j] = flat.segment<3>(translation_offset(j));
  }
  p.global_rotation = flat.segment<4>(p.global_rotation_offset());
  p.global_translation = flat.segment<3>(p.global_translation_offset());
  return p;
}

int argmax(const std::vector<double>& v) {
  if (v.empty()) return 0;
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

void normalize_simplex(std::vector<double>& v) {
  double sum = 0.0;
  for (auto& x : v) {
    if (!(x > 0.0)) x = 0.0;
    sum += x;
  }
  if (sum <= 0.0) {
    std::fill(v.begin(), v.end(), v.empty() ? 0.0 : 1.0 / v.size());
    return;
  }
  for (auto& x : v) x /= sum;
}

}  // namespace semsuper
