#pragma once

#include <string>
#include <vector>

#include "semsuper/objective.hpp"

namespace semsuper {

struct OptimizerConfig {
  std::string method = "adam";     // "adam" or "gd"
  double step_translation = 1e-3;  // node b and global translation
  double step_rotation = 3e-3;     // quaternions
  int max_iters = 50;
  int reassoc_every = 5;
  double tol = 1e-5;               // relative decrease over `tol_window` accepted steps
  int tol_window = 5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int rigid_iters = 15;            // leading iterations that move only the global translation

  void validate() const;
};

struct OptimizeResult {
  DeformationParams params;
  std::string status = "ok";  // "ok" or "skipped"
  int iterations = 0;
  int accepted_steps = 0;
  ObjectiveTerms initial;
  ObjectiveTerms final;
  // Objective after every accepted step; rigid-stage entries are on the
  // objective without the morph term.
  std::vector<double> history;
};

// Minimizes the frame objective starting from `init`. The first
// `rigid_iters` iterations move only the global translation and ignore the
// morph term; the remaining ones move only node parameters. With
// rigid_iters = 0 all parameters move together. Morph targets and the
// render context are refreshed every iteration, associations every
// `reassoc_every` iterations. A step is kept only if it does not increase the
// objective under the structure it was computed with; otherwise it is undone
// and the step scale halved. The result never has a larger objective than
// `init` under the final structure. If nothing associates at the start the
// frame is reported as "skipped" and `init` returned.
OptimizeResult optimize(const SceneView& scene, const DeformationParams& init, const Frame& frame,
                        const ObservationMaps& maps, const SemanticBoundaryField& field,
                        const LossWeights& weights, const OptimizerConfig& config,
                        const AssociationConfig& assoc_config = {},
                        const RenderConfig& render_config = {});

}  // namespace semsuper
