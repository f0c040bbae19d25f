#include "semsuper/association.hpp"

#include <cmath>
#include <numbers>

#include "semsuper/semantics.hpp"

namespace semsuper {

DeformedScene::DeformedScene(const SceneView& scene_, const DeformationParams& params)
    : scene(scene_), deformer(scene_.graph, params) {
  if (scene.skinning.size() != scene.surfels.size()) {
    throw Error("skinning/surfel count mismatch");
  }
  positions.resize(scene.surfels.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    positions[i] = deformer.point(scene.surfels[i].position, scene.skinning[i]);
  }
}

std::optional<BilinearSample> bilinear_footprint(const Vec2& uv, int width, int height) {
  const double u = uv.x(), v = uv.y();
  if (!(u >= 0.0) || !(v >= 0.0) || u > width - 1 || v > height - 1) return std::nullopt;
  BilinearSample s;
  s.u0 = std::min(static_cast<int>(std::floor(u)), std::max(width - 2, 0));
  s.v0 = std::min(static_cast<int>(std::floor(v)), std::max(height - 2, 0));
  s.wu = u - s.u0;
  s.wv = v - s.v0;
  // Round-off around a lattice point must not pull in a neighbor.
  constexpr double snap = 1e-9;
  if (s.wu < snap) s.wu = 0.0;
  if (s.wv < snap) s.wv = 0.0;
  if (s.wu > 1.0 - snap) {
    ++s.u0;
    s.wu = 0.0;
  }
  if (s.wv > 1.0 - snap) {
    ++s.v0;
    s.wv = 0.0;
  }
  return s;
}

std::optional<ObservationSample> sample_observation(const Frame& frame, const ObservationMaps& maps,
                                                    const Vec2& uv) {
  const auto fp = bilinear_footprint(uv, maps.width(), maps.height());
  if (!fp) return std::nullopt;
  bool ok = true;
  fp->for_each([&](int u, int v, double) { ok = ok && maps.valid(u, v); });
  if (!ok) return std::nullopt;

  const int C = frame.num_classes();
  ObservationSample s{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), std::vector<double>(C, 0.0)};
  fp->for_each([&](int u, int v, double w) {
    s.point += w * maps.points(u, v);
    s.normal += w * maps.normals(u, v);
    for (int c = 0; c < 3; ++c) s.color[c] += w * frame.rgb.at(u, v, c);
    const float* p = frame.sem_probs.pixel(u, v);
    for (int c = 0; c < C; ++c) s.sem[c] += w * p[c];
  });
  const double nn = s.normal.norm();
  if (nn < 1e-12) return std::nullopt;
  s.normal /= nn;
  normalize_simplex(s.sem);
  return s;
}

AssociationSet associate(const DeformedScene& deformed, const ObservationMaps& maps,
                         const Frame& frame, const AssociationConfig& config) {
  const auto& surfels = deformed.scene.surfels;
  const CameraIntrinsics& K = frame.intrinsics;
  const double cos_thresh = std::cos(config.angle_thresh_deg * std::numbers::pi / 180.0);

  AssociationSet out;
  out.records.resize(surfels.size());
  for (std::size_t i = 0; i < surfels.size(); ++i) {
    const Vec3& p = deformed.positions[i];
    if (p.z() <= 1e-6) continue;
    const auto obs = sample_observation(frame, maps, project(p, K));
    if (!obs) continue;
    if ((p - obs->point).norm() > config.dist_thresh) continue;
    Vec3 n;
    try {
      n = deformed.deformer.normal(surfels[i].normal, deformed.scene.skinning[i]);
    } catch (const Error&) {
      continue;
    }
    if (n.dot(obs->normal) < cos_thresh) continue;

    double rho = 1.0;
    if (config.use_semantics) {
      if (config.soft_label_mode) {
        rho = semantic_weight(surfels[i].sem_scores, obs->sem);
      } else if (argmax(surfels[i].sem_scores) != argmax(obs->sem)) {
        continue;
      }
    }
    out.records[i] = AssociationRecord{obs->point, obs->normal, obs->sem, rho};
    ++out.accepted;
  }
  return out;
}

AssociationSet associate(const SceneView& scene, const DeformationParams& params,
                         const ObservationMaps& maps, const Frame& frame,
                         const AssociationConfig& config) {
  return associate(DeformedScene(scene, params), maps, frame, config);
}

}  // namespace semsuper
