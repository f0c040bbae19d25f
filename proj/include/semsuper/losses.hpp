#pragma once

#include <span>
#include <vector>

#include "semsuper/association.hpp"
#include "semsuper/semantics.hpp"

namespace semsuper {

// Every loss returns its value and, when `grad` is non-empty, adds
// `scale * d loss / d params` into it (flat DeformationParams layout).

// Mean over accepted associations of rho * (n_o . (p - p_o))^2.
// Throws Error("no data association") when nothing was accepted.
double icp_loss(const DeformedScene& deformed, const AssociationSet& assoc,
                std::span<double> grad = {}, double scale = 1.0);
double icp_loss(const SceneView& scene, const DeformationParams& params,
                const AssociationSet& assoc);

// Per surfel: whether its projection lies outside its own semantic region and,
// if so, the nearest boundary pixel of that region. Held fixed while
// differentiating.
struct MorphTargets {
  std::vector<char> active;
  std::vector<Vec2> target;
  std::size_t surfel_count = 0;
};

MorphTargets morph_targets(const DeformedScene& deformed, const SemanticBoundaryField& field,
                           const CameraIntrinsics& K);

// Sum over active surfels of the squared pixel distance to their target,
// divided by the total surfel count.
double morphing_loss(const DeformedScene& deformed, const MorphTargets& targets,
                     const CameraIntrinsics& K, std::span<double> grad = {}, double scale = 1.0);
double morphing_loss(const SceneView& scene, const DeformationParams& params,
                     const SemanticBoundaryField& field, const CameraIntrinsics& K);

// Mean over triangles of (area of the transformed triangle - rest area)^2.
double face_loss(const EDGraph& graph, const Deformer& deformer, std::span<double> grad = {},
                 double scale = 1.0);
double face_loss(const EDGraph& graph, const DeformationParams& params);

// Mean over nodes of (1 - q^T q)^2.
double rot_loss(const DeformationParams& params, std::span<double> grad = {}, double scale = 1.0);

}  // namespace semsuper
