#pragma once

#include <optional>
#include <vector>

#include "semsuper/deformation.hpp"
#include "semsuper/frame.hpp"
#include "semsuper/observation.hpp"

namespace semsuper {

// Non-owning view of the tracked model that the losses evaluate.
struct SceneView {
  const std::vector<Surfel>& surfels;
  const std::vector<SkinningEntry>& skinning;
  const EDGraph& graph;
};

// Surfel positions under one parameter vector, with the cached node
// rotations needed to back-propagate into the parameters.
struct DeformedScene {
  DeformedScene(const SceneView& scene, const DeformationParams& params);

  const SceneView& scene;
  Deformer deformer;
  std::vector<Vec3> positions;
};

struct AssociationConfig {
  double dist_thresh = 0.05;      // meters
  double angle_thresh_deg = 45.0;
  bool soft_label_mode = true;    // rho = exp(-JSD); otherwise hard labels must match
  bool use_semantics = true;      // false: rho = 1 for every pair, labels ignored
};

struct AssociationRecord {
  Vec3 point;
  Vec3 normal;
  std::vector<double> sem;
  double weight = 1.0;
};

struct AssociationSet {
  std::vector<std::optional<AssociationRecord>> records;  // one slot per surfel
  std::size_t accepted = 0;
};

struct BilinearSample {
  int u0 = 0, v0 = 0;
  double wu = 0.0, wv = 0.0;  // weights of the (u0 + 1) column and (v0 + 1) row

  // Calls fn(u, v, weight) for each lattice pixel with positive weight.
  template <typename Fn>
  void for_each(Fn&& fn) const {
    const double w[4] = {(1 - wu) * (1 - wv), wu * (1 - wv), (1 - wu) * wv, wu * wv};
    const int du[4] = {0, 1, 0, 1};
    const int dv[4] = {0, 0, 1, 1};
    for (int i = 0; i < 4; ++i) {
      if (w[i] > 0.0) fn(u0 + du[i], v0 + dv[i], w[i]);
    }
  }
};

// Bilinear footprint of a sub-pixel location; nullopt outside [0, W-1] x [0, H-1].
std::optional<BilinearSample> bilinear_footprint(const Vec2& uv, int width, int height);

struct ObservationSample {
  Vec3 point;
  Vec3 normal;
  Vec3 color;
  std::vector<double> sem;
};

// Bilinearly interpolated observation at `uv`; nullopt if outside the image
// or any contributing pixel is invalid. Normal and scores are renormalized.
std::optional<ObservationSample> sample_observation(const Frame& frame, const ObservationMaps& maps,
                                                    const Vec2& uv);

AssociationSet associate(const DeformedScene& deformed, const ObservationMaps& maps,
                         const Frame& frame, const AssociationConfig& config);

AssociationSet associate(const SceneView& scene, const DeformationParams& params,
                         const ObservationMaps& maps, const Frame& frame,
                         const AssociationConfig& config);

}  // namespace semsuper
