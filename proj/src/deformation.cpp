#include "semsuper/deformation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace semsuper {

namespace {

Mat3 unnormalized_rotation(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 m;
  m << w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z;
  return m;
}

}  // namespace

Mat3 quaternion_to_rotation(const Vec4& q) {
  const double s = q.squaredNorm();
  if (s <= 0.0) return Mat3::Identity();
  return unnormalized_rotation(q) / s;
}

std::array<Mat3, 4> quaternion_rotation_derivatives(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  const double s = q.squaredNorm();
  std::array<Mat3, 4> dm;
  dm[0] << w, -z, y, z, w, -x, -y, x, w;
  dm[1] << x, y, z, y, -x, -w, z, w, -x;
  dm[2] << -y, x, w, x, y, z, -w, z, -y;
  dm[3] << -z, -w, x, w, -z, y, x, y, z;
  std::array<Mat3, 4> out;
  if (s <= 0.0) {
    for (auto& m : out) m.setZero();
    return out;
  }
  const Mat3 m = unnormalized_rotation(q);
  for (int k = 0; k < 4; ++k) {
    out[k] = 2.0 * dm[k] / s - m * (2.0 * q[k] / (s * s));
  }
  return out;
}

Vec4 axis_angle_quaternion(const Vec3& axis, double angle) {
  const Vec3 a = axis.normalized();
  const double h = 0.5 * angle;
  return Vec4(std::cos(h), a.x() * std::sin(h), a.y() * std::sin(h), a.z() * std::sin(h));
}

SkinningEntry skinning_weights(const Vec3& p, const EDGraph& graph, int k, int allowed_label) {
  if (k <= 0 || graph.size() < static_cast<std::size_t>(k)) {
    throw Error("insufficient graph");
  }
  std::vector<int> candidates;
  if (allowed_label >= 0) {
    for (std::size_t j = 0; j < graph.size(); ++j) {
      if (graph.nodes[j].label == allowed_label) candidates.push_back(static_cast<int>(j));
    }
  }
  if (candidates.size() < static_cast<std::size_t>(k)) {
    candidates.resize(graph.size());
    std::iota(candidates.begin(), candidates.end(), 0);
  }

  std::vector<std::pair<double, int>> dist;
  dist.reserve(candidates.size());
  for (int j : candidates) dist.emplace_back((p - graph.nodes[j].rest).norm(), j);
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

  SkinningEntry out;
  out.nodes.resize(k);
  out.weights.resize(k);
  // Shifting by the nearest distance leaves the normalized weights unchanged
  // and keeps exp() away from underflow for distant surfels.
  const double d0 = dist[0].first;
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    out.nodes[i] = dist[i].second;
    out.weights[i] = std::exp(-(dist[i].first - d0));
    sum += out.weights[i];
  }
  for (auto& w : out.weights) w /= sum;
  return out;
}

Vec3 transform_point(const Vec3& p, const DeformationParams& params, const SkinningEntry& skin,
                     const EDGraph& graph) {
  Vec3 blended = Vec3::Zero();
  for (std::size_t i = 0; i < skin.nodes.size(); ++i) {
    const int j = skin.nodes[i];
    const Vec3& g = graph.nodes[j].rest;
    blended += skin.weights[i] * (quaternion_to_rotation(params.node_rotation[j]) * (p - g) + g +
                                  params.node_translation[j]);
  }
  return quaternion_to_rotation(params.global_rotation) * blended + params.global_translation;
}

Vec3 transform_normal(const Vec3& n, const DeformationParams& params, const SkinningEntry& skin,
                      const EDGraph& graph) {
  (void)graph;
  Vec3 blended = Vec3::Zero();
  for (std::size_t i = 0; i < skin.nodes.size(); ++i) {
    blended += skin.weights[i] * (quaternion_to_rotation(params.node_rotation[skin.nodes[i]]) * n);
  }
  const Vec3 out = quaternion_to_rotation(params.global_rotation) * blended;
  const double norm = out.norm();
  if (norm < 1e-8) throw Error("degenerate normal blend");
  return out / norm;
}

Vec2 project(const Vec3& p, const CameraIntrinsics& K) {
  if (p.z() <= 1e-6) throw Error("behind camera");
  return {K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy};
}

Eigen::Matrix<double, 2, 3> project_jacobian(const Vec3& p, const CameraIntrinsics& K) {
  const double iz = 1.0 / p.z();
  Eigen::Matrix<double, 2, 3> j;
  j << K.fx * iz, 0.0, -K.fx * p.x() * iz * iz, 0.0, K.fy * iz, -K.fy * p.y() * iz * iz;
  return j;
}

Vec3 backproject_pixel(double u, double v, double depth, const CameraIntrinsics& K) {
  return {depth * (u - K.cx) / K.fx, depth * (v - K.cy) / K.fy, depth};
}

Deformer::Deformer(const EDGraph& graph, const DeformationParams& params)
    : graph_(graph), params_(params) {
  if (params.node_count() != graph.size()) {
    throw Error("parameter/graph size mismatch");
  }
  rotation_.resize(graph.size());
  rotation_grad_.resize(graph.size());
  for (std::size_t j = 0; j < graph.size(); ++j) {
    rotation_[j] = quaternion_to_rotation(params.node_rotation[j]);
    rotation_grad_[j] = quaternion_rotation_derivatives(params.node_rotation[j]);
  }
  global_rotation_ = quaternion_to_rotation(params.global_rotation);
  global_rotation_grad_ = quaternion_rotation_derivatives(params.global_rotation);
}

Vec3 Deformer::blend(const Vec3& p, const SkinningEntry& skin) const {
  Vec3 u = Vec3::Zero();
  for (std::size_t i = 0; i < skin.nodes.size(); ++i) {
    const int j = skin.nodes[i];
    const Vec3& g = graph_.nodes[j].rest;
    u += skin.weights[i] * (rotation_[j] * (p - g) + g + params_.node_translation[j]);
  }
  return u;
}

Vec3 Deformer::point(const Vec3& p, const SkinningEntry& skin) const {
  return global_rotation_ * blend(p, skin) + params_.global_translation;
}

Vec3 Deformer::normal(const Vec3& n, const SkinningEntry& skin) const {
  Vec3 blended = Vec3::Zero();
  for (std::size_t i = 0; i < skin.nodes.size(); ++i) {
    blended += skin.weights[i] * (rotation_[skin.nodes[i]] * n);
  }
  const Vec3 out = global_rotation_ * blended;
  const double norm = out.norm();
  if (norm < 1e-8) throw Error("degenerate normal blend");
  return out / norm;
}

Vec3 Deformer::node_position(int j) const {
  return global_rotation_ * (graph_.nodes[j].rest + params_.node_translation[j]) +
         params_.global_translation;
}

void Deformer::accumulate_point_gradient(const Vec3& p, const SkinningEntry& skin,
                                         const Vec3& dloss_dpoint, std::span<double> grad) const {
  const Vec3 u = blend(p, skin);
  const std::size_t gq = params_.global_rotation_offset();
  const std::size_t gt = params_.global_translation_offset();
  for (int k = 0; k < 3; ++k) grad[gt + k] += dloss_dpoint[k];
  for (int k = 0; k < 4; ++k) grad[gq + k] += dloss_dpoint.dot(global_rotation_grad_[k] * u);

  const Vec3 local = global_rotation_.transpose() * dloss_dpoint;
  for (std::size_t i = 0; i < skin.nodes.size(); ++i) {
    const int j = skin.nodes[i];
    const double w = skin.weights[i];
    const Vec3 d = p - graph_.nodes[j].rest;
    const std::size_t qo = DeformationParams::rotation_offset(j);
    const std::size_t bo = DeformationParams::translation_offset(j);
    for (int k = 0; k < 3; ++k) grad[bo + k] += w * local[k];
    for (int k = 0; k < 4; ++k) grad[qo + k] += w * local.dot(rotation_grad_[j][k] * d);
  }
}

void Deformer::accumulate_node_gradient(int j, const Vec3& dloss_dpoint,
                                        std::span<double> grad) const {
  const Vec3 u = graph_.nodes[j].rest + params_.node_translation[j];
  const std::size_t gq = params_.global_rotation_offset();
  const std::size_t gt = params_.global_translation_offset();
  for (int k = 0; k < 3; ++k) grad[gt + k] += dloss_dpoint[k];
  for (int k = 0; k < 4; ++k) grad[gq + k] += dloss_dpoint.dot(global_rotation_grad_[k] * u);
  const Vec3 local = global_rotation_.transpose() * dloss_dpoint;
  const std::size_t bo = DeformationParams::translation_offset(j);
  for (int k = 0; k < 3; ++k) grad[bo + k] += local[k];
}

}  // namespace semsuper
