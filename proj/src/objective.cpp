#include "semsuper/objective.hpp"

#include <cmath>
#include <span>

namespace semsuper {

void LossWeights::validate() const {
  if (lambda_s < 0 || lambda_m < 0 || lambda_r < 0) throw Error("loss weights must be non-negative");
  if (!(length_unit_m > 0)) throw Error("length_unit_m must be positive");
  if (!enable_icp && !enable_render) throw Error("at least one similarity term must be enabled");
}

Objective::Objective(const SceneView& scene, const Frame& frame, const ObservationMaps& maps,
                     const SemanticBoundaryField& field, const LossWeights& weights,
                     const AssociationConfig& assoc_config, const RenderConfig& render_config)
    : scene_(scene),
      frame_(frame),
      maps_(maps),
      field_(field),
      weights_(weights),
      assoc_config_(assoc_config),
      render_config_(render_config) {
  weights_.validate();
  assoc_config_.soft_label_mode = weights_.soft_label_mode;
  assoc_config_.use_semantics = weights_.use_semantics;
  if (weights_.enable_render) {
    render_K_ = frame.intrinsics.downsampled(render_config_.downsample);
    ssim_ref_.emplace(downsample_image(frame.rgb, render_config_.downsample),
                      render_config_.window);
  }
}

std::size_t Objective::refresh(const DeformationParams& params, bool associations) {
  const DeformedScene deformed(scene_, params);
  if (weights_.enable_icp && associations) {
    AssociationSet fresh = associate(deformed, maps_, frame_, assoc_config_);
    if (fresh.accepted > 0 || frozen_.assoc.records.empty()) frozen_.assoc = std::move(fresh);
  }
  if (weights_.enable_morph) frozen_.morph = morph_targets(deformed, field_, frame_.intrinsics);
  if (weights_.enable_render) {
    splat_render(deformed.positions, scene_.surfels, render_K_, render_config_, nullptr,
                 &frozen_.render);
  }
  return frozen_.assoc.accepted;
}

ObjectiveTerms Objective::evaluate(const DeformationParams& params, VecX* grad) const {
  const DeformedScene deformed(scene_, params);
  std::span<double> g;
  if (grad) {
    *grad = VecX::Zero(static_cast<Eigen::Index>(params.size()));
    g = std::span<double>(grad->data(), static_cast<std::size_t>(grad->size()));
  }
  const LossWeights& w = weights_;
  const double icp_scale = 1.0 / (w.length_unit_m * w.length_unit_m);
  const double face_scale = icp_scale * icp_scale;
  ObjectiveTerms t;
  if (w.enable_icp) {
    if (frozen_.assoc.records.size() != scene_.surfels.size()) throw Error("no data association");
    t.icp = icp_scale * icp_loss(deformed, frozen_.assoc, g, w.lambda_s * icp_scale);
  }
  if (w.enable_render) {
    const RenderedImage img = splat_render(deformed.positions, scene_.surfels, render_K_,
                                           render_config_, &frozen_.render);
    Image<double> dimg;
    t.render = ssim_ref_->loss(img.color, frozen_.render.covered, grad ? &dimg : nullptr);
    if (grad && w.lambda_s != 0.0) {
      const std::vector<Vec3> dp = splat_backward(deformed.positions, scene_.surfels, render_K_,
                                                  render_config_, frozen_.render, img, dimg);
      for (std::size_t i = 0; i < dp.size(); ++i) {
        if (dp[i].isZero(0.0)) continue;
        deformed.deformer.accumulate_point_gradient(scene_.surfels[i].position,
                                                    scene_.skinning[i], w.lambda_s * dp[i], g);
      }
    }
  }
  if (w.enable_morph) {
    if (frozen_.morph.active.size() != scene_.surfels.size()) {
      throw Error("objective: morph targets not initialized");
    }
    t.morph = morphing_loss(deformed, frozen_.morph, frame_.intrinsics, g, w.lambda_m);
  }
  t.face = face_scale * face_loss(scene_.graph, deformed.deformer, g, w.lambda_r * face_scale);
  t.rot = rot_loss(params, g, w.lambda_r);
  t.total = w.lambda_s * (t.icp + t.render) + w.lambda_m * t.morph + w.lambda_r * (t.face + t.rot);
  if (!std::isfinite(t.total)) throw Error("non-finite objective");
  if (grad && !grad->allFinite()) throw Error("non-finite gradient");
  return t;
}

ObjectiveTerms total_objective(const SceneView& scene, const DeformationParams& params,
                               const Frame& frame, const ObservationMaps& maps,
                               const SemanticBoundaryField& field, const LossWeights& weights,
                               const AssociationConfig& assoc_config,
                               const RenderConfig& render_config) {
  Objective obj(scene, frame, maps, field, weights, assoc_config, render_config);
  obj.refresh(params);
  return obj.evaluate(params);
}

VecX gradient(const SceneView& scene, const DeformationParams& params, const Frame& frame,
              const ObservationMaps& maps, const SemanticBoundaryField& field,
              const LossWeights& weights, const AssociationConfig& assoc_config,
              const RenderConfig& render_config) {
  Objective obj(scene, frame, maps, field, weights, assoc_config, render_config);
  obj.refresh(params);
  VecX g;
  obj.evaluate(params, &g);
  return g;
}

}  // namespace semsuper
