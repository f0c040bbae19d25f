#include "semsuper/losses.hpp"

#include <algorithm>
#include <cmath>

namespace semsuper {

double icp_loss(const DeformedScene& deformed, const AssociationSet& assoc, std::span<double> grad,
                double scale) {
  if (assoc.accepted == 0) throw Error("no data association");
  if (assoc.records.size() != deformed.positions.size()) {
    throw Error("association/surfel count mismatch");
  }
  const double inv_count = 1.0 / static_cast<double>(assoc.accepted);
  double sum = 0.0;
  for (std::size_t i = 0; i < assoc.records.size(); ++i) {
    const auto& rec = assoc.records[i];
    if (!rec) continue;
    const double r = rec->normal.dot(deformed.positions[i] - rec->point);
    sum += rec->weight * r * r;
    if (!grad.empty()) {
      const Vec3 g = (scale * 2.0 * rec->weight * r * inv_count) * rec->normal;
      deformed.deformer.accumulate_point_gradient(deformed.scene.surfels[i].position,
                                                  deformed.scene.skinning[i], g, grad);
    }
  }
  return sum * inv_count;
}

double icp_loss(const SceneView& scene, const DeformationParams& params,
                const AssociationSet& assoc) {
  return icp_loss(DeformedScene(scene, params), assoc);
}

MorphTargets morph_targets(const DeformedScene& deformed, const SemanticBoundaryField& field,
                           const CameraIntrinsics& K) {
  const auto& surfels = deformed.scene.surfels;
  MorphTargets t;
  t.surfel_count = surfels.size();
  t.active.assign(surfels.size(), 0);
  t.target.assign(surfels.size(), Vec2::Zero());
  const int W = field.width(), H = field.height();
  for (std::size_t i = 0; i < surfels.size(); ++i) {
    const Vec3& p = deformed.positions[i];
    if (p.z() <= 1e-6) continue;
    const int label = surfels[i].label;
    if (label < 0 || label >= static_cast<int>(field.classes.size())) continue;
    const ClassBoundary& cls = field.classes[label];
    if (!cls.present) continue;

    const Vec2 uv = project(p, K);
    const int u = static_cast<int>(std::lround(uv.x()));
    const int v = static_cast<int>(std::lround(uv.y()));
    const bool inside_image = u >= 0 && v >= 0 && u < W && v < H;
    if (inside_image && field.labels(u, v) == label) continue;

    const int cu = std::clamp(u, 0, W - 1);
    const int cv = std::clamp(v, 0, H - 1);
    const int nearest = cls.field.nearest(cu, cv);
    if (nearest < 0) continue;
    t.active[i] = 1;
    t.target[i] = Vec2(nearest % W, nearest / W);
  }
  return t;
}

double morphing_loss(const DeformedScene& deformed, const MorphTargets& targets,
                     const CameraIntrinsics& K, std::span<double> grad, double scale) {
  if (targets.surfel_count == 0) return 0.0;
  const double inv_count = 1.0 / static_cast<double>(targets.surfel_count);
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.active.size(); ++i) {
    if (!targets.active[i]) continue;
    const Vec3& p = deformed.positions[i];
    if (p.z() <= 1e-6) continue;
    const Vec2 diff = project(p, K) - targets.target[i];
    sum += diff.squaredNorm();
    if (!grad.empty()) {
      const Vec3 g = (scale * 2.0 * inv_count) * (project_jacobian(p, K).transpose() * diff);
      deformed.deformer.accumulate_point_gradient(deformed.scene.surfels[i].position,
                                                  deformed.scene.skinning[i], g, grad);
    }
  }
  return sum * inv_count;
}

double morphing_loss(const SceneView& scene, const DeformationParams& params,
                     const SemanticBoundaryField& field, const CameraIntrinsics& K) {
  const DeformedScene deformed(scene, params);
  return morphing_loss(deformed, morph_targets(deformed, field, K), K);
}

double face_loss(const EDGraph& graph, const Deformer& deformer, std::span<double> grad,
                 double scale) {
  if (graph.triangles.empty()) return 0.0;
  const double inv_count = 1.0 / static_cast<double>(graph.triangles.size());
  double sum = 0.0;
  for (const Triangle& tri : graph.triangles) {
    const Vec3 xi = deformer.node_position(tri.nodes[0]);
    const Vec3 xj = deformer.node_position(tri.nodes[1]);
    const Vec3 xk = deformer.node_position(tri.nodes[2]);
    const Vec3 e1 = xj - xi;
    const Vec3 e2 = xk - xi;
    const Vec3 c = e1.cross(e2);
    const double cn = c.norm();
    const double diff = 0.5 * cn - tri.rest_area;
    sum += diff * diff;
    if (!grad.empty() && cn > 0.0) {
      const Vec3 chat = c / cn;
      const double coef = scale * 2.0 * diff * inv_count;
      const Vec3 d_e1 = coef * 0.5 * e2.cross(chat);
      const Vec3 d_e2 = coef * 0.5 * chat.cross(e1);
      deformer.accumulate_node_gradient(tri.nodes[0], -(d_e1 + d_e2), grad);
      deformer.accumulate_node_gradient(tri.nodes[1], d_e1, grad);
      deformer.accumulate_node_gradient(tri.nodes[2], d_e2, grad);
    }
  }
  return sum * inv_count;
}

double face_loss(const EDGraph& graph, const DeformationParams& params) {
  return face_loss(graph, Deformer(graph, params));
}

double rot_loss(const DeformationParams& params, std::span<double> grad, double scale) {
  const std::size_t n = params.node_count();
  if (n == 0) return 0.0;
  const double inv_count = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const Vec4& q = params.node_rotation[j];
    const double r = 1.0 - q.squaredNorm();
    sum += r * r;
    if (!grad.empty()) {
      const double coef = -4.0 * r * inv_count * scale;
      const std::size_t off = DeformationParams::rotation_offset(j);
      for (int k = 0; k < 4; ++k) grad[off + k] += coef * q[k];
    }
  }
  return sum * inv_count;
}

}  // namespace semsuper
