#pragma once

#include <optional>

#include "semsuper/association.hpp"
#include "semsuper/losses.hpp"
#include "semsuper/renderer.hpp"
#include "semsuper/semantics.hpp"
#include "semsuper/ssim.hpp"

namespace semsuper {

struct LossWeights {
  double lambda_s = 1.0;   // similarity (icp + render)
  double lambda_m = 10.0;  // morphing
  double lambda_r = 10.0;  // face + quaternion norm
  bool enable_icp = true;
  bool enable_render = true;
  bool enable_morph = true;
  bool soft_label_mode = true;
  bool use_semantics = true;
  // Geometric terms are evaluated with lengths expressed in this unit, so the
  // ICP residual and triangle areas are commensurate with the unitless
  // rendering and quaternion terms.
  double length_unit_m = 1e-3;

  // Throws Error for negative weights or when no similarity term is enabled.
  void validate() const;
};

// Term values as weighted in the total (geometric terms in length_unit_m).
struct ObjectiveTerms {
  double icp = 0.0;
  double render = 0.0;
  double morph = 0.0;
  double face = 0.0;
  double rot = 0.0;
  double total = 0.0;
};

// Everything that stays constant while the objective is differentiated:
// data associations, morphing targets and the render depth reference.
struct FrozenStructure {
  AssociationSet assoc;
  MorphTargets morph;
  RenderContext render;
};

// The per-frame objective. Holds the frame-derived inputs and the current
// frozen structure; refresh() rebuilds the latter at a parameter vector.
class Objective {
 public:
  Objective(const SceneView& scene, const Frame& frame, const ObservationMaps& maps,
            const SemanticBoundaryField& field, const LossWeights& weights,
            const AssociationConfig& assoc_config = {}, const RenderConfig& render_config = {});

  // Recomputes associations (when `associations` is set), morph targets and
  // render context at `params`. Returns the number of accepted associations.
  // A re-association that accepts nothing keeps the previous set.
  std::size_t refresh(const DeformationParams& params, bool associations = true);

  // Objective under the current frozen structure. When `grad` is non-null it
  // is resized to params.size() and filled with the exact gradient. Throws
  // Error("no data association") when ICP is on and nothing is associated,
  // Error("non-finite objective") on NaN/inf.
  ObjectiveTerms evaluate(const DeformationParams& params, VecX* grad = nullptr) const;

  const FrozenStructure& frozen() const { return frozen_; }
  const LossWeights& weights() const { return weights_; }
  const CameraIntrinsics& render_intrinsics() const { return render_K_; }

 private:
  SceneView scene_;
  const Frame& frame_;
  const ObservationMaps& maps_;
  const SemanticBoundaryField& field_;
  LossWeights weights_;
  AssociationConfig assoc_config_;
  RenderConfig render_config_;
  CameraIntrinsics render_K_;
  std::optional<SsimReference> ssim_ref_;
  FrozenStructure frozen_;
};

// One-shot evaluation with structure frozen at `params` itself.
ObjectiveTerms total_objective(const SceneView& scene, const DeformationParams& params,
                               const Frame& frame, const ObservationMaps& maps,
                               const SemanticBoundaryField& field, const LossWeights& weights,
                               const AssociationConfig& assoc_config = {},
                               const RenderConfig& render_config = {});

VecX gradient(const SceneView& scene, const DeformationParams& params, const Frame& frame,
              const ObservationMaps& maps, const SemanticBoundaryField& field,
              const LossWeights& weights, const AssociationConfig& assoc_config = {},
              const RenderConfig& render_config = {});

}  // namespace semsuper
