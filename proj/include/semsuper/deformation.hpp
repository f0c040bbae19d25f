#pragma once

#include <array>
#include <span>

#include "semsuper/types.hpp"

namespace semsuper {

// Rotation matrix of a possibly non-unit quaternion (w, x, y, z). The usual
// homogeneous formula divided by |q|^2, so any non-zero q gives a proper
// rotation.
Mat3 quaternion_to_rotation(const Vec4& q);

// d R / d q_k for k = 0..3, matching quaternion_to_rotation.
std::array<Mat3, 4> quaternion_rotation_derivatives(const Vec4& q);

Vec4 axis_angle_quaternion(const Vec3& axis, double angle);

// k nearest nodes of `p` (Euclidean) with weights exp(-|p - g_j|) normalized
// to sum to one. When `allowed_label` is non-negative only nodes carrying
// that label are considered, falling back to all nodes if fewer than k match.
SkinningEntry skinning_weights(const Vec3& p, const EDGraph& graph, int k,
                               int allowed_label = -1);

Vec3 transform_point(const Vec3& p, const DeformationParams& params,
                     const SkinningEntry& skin, const EDGraph& graph);

Vec3 transform_normal(const Vec3& n, const DeformationParams& params,
                      const SkinningEntry& skin, const EDGraph& graph);

Vec2 project(const Vec3& p, const CameraIntrinsics& K);

// Jacobian of project() with respect to p.
Eigen::Matrix<double, 2, 3> project_jacobian(const Vec3& p,
                                             const CameraIntrinsics& K);

Vec3 backproject_pixel(double u, double v, double depth,
                       const CameraIntrinsics& K);

// Caches per-node rotations and their quaternion derivatives for one
// parameter vector so that many surfels can be transformed and
// back-propagated cheaply.
class Deformer {
 public:
  Deformer(const EDGraph& graph, const DeformationParams& params);

  Vec3 point(const Vec3& p, const SkinningEntry& skin) const;
  // Throws Error("degenerate normal blend") when the blend nearly cancels.
  Vec3 normal(const Vec3& n, const SkinningEntry& skin) const;
  // Position of node j moved by its own translation and the global transform.
  Vec3 node_position(int j) const;

  // grad += (d point / d params)^T * dloss_dpoint
  void accumulate_point_gradient(const Vec3& p, const SkinningEntry& skin,
                                 const Vec3& dloss_dpoint,
                                 std::span<double> grad) const;
  void accumulate_node_gradient(int j, const Vec3& dloss_dpoint,
                                std::span<double> grad) const;

  const DeformationParams& params() const { return params_; }
  const EDGraph& graph() const { return graph_; }

 private:
  Vec3 blend(const Vec3& p, const SkinningEntry& skin) const;

  const EDGraph& graph_;
  const DeformationParams& params_;
  std::vector<Mat3> rotation_;
  std::vector<std::array<Mat3, 4>> rotation_grad_;
  Mat3 global_rotation_;
  std::array<Mat3, 4> global_rotation_grad_;
};

}  // namespace semsuper
