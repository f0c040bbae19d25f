#include "semsuper/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace semsuper {

void OptimizerConfig::validate() const {
  if (method != "adam" && method != "gd") throw Error("optimizer method must be adam or gd");
  if (!(step_translation > 0) || !(step_rotation > 0)) throw Error("step sizes must be positive");
  if (max_iters < 0) throw Error("max_iters must be non-negative");
  if (reassoc_every < 1) throw Error("reassoc_every must be >= 1");
  if (tol < 0 || tol_window < 1) throw Error("invalid convergence tolerance");
  if (rigid_iters < 0) throw Error("rigid_iters must be non-negative");
}

namespace {

VecX step_sizes(std::size_t node_count, const OptimizerConfig& cfg) {
  VecX s(static_cast<Eigen::Index>(7 * (node_count + 1)));
  for (std::size_t j = 0; j <= node_count; ++j) {
    s.segment(7 * j, 4).setConstant(cfg.step_rotation);
    s.segment(7 * j + 4, 3).setConstant(cfg.step_translation);
  }
  return s;
}

// 1 for the global translation, 0 elsewhere.
VecX global_translation_mask(const DeformationParams& p) {
  VecX mask = VecX::Zero(static_cast<Eigen::Index>(p.size()));
  mask.segment(static_cast<Eigen::Index>(p.global_translation_offset()), 3).setOnes();
  return mask;
}

}  // namespace

OptimizeResult optimize(const SceneView& scene, const DeformationParams& init, const Frame& frame,
                        const ObservationMaps& maps, const SemanticBoundaryField& field,
                        const LossWeights& weights, const OptimizerConfig& cfg,
                        const AssociationConfig& assoc_config, const RenderConfig& render_config) {
  cfg.validate();
  OptimizeResult res;
  res.params = init;

  Objective obj(scene, frame, maps, field, weights, assoc_config, render_config);
  if (obj.refresh(init) == 0 && weights.enable_icp) {
    res.status = "skipped";
    return res;
  }

  // The rigid stage aligns the global translation on the similarity terms
  // alone; the morph term only makes sense once the surface roughly fits.
  // Afterwards only node parameters move, so noisy per-surfel terms cannot
  // drag the whole scene.
  LossWeights rigid_weights = weights;
  rigid_weights.enable_morph = false;
  Objective rigid_obj(scene, frame, maps, field, rigid_weights, assoc_config, render_config);
  const int rigid_iters = std::min(cfg.rigid_iters, cfg.max_iters);
  if (rigid_iters > 0) rigid_obj.refresh(init);

  const VecX lr = step_sizes(init.node_count(), cfg);
  const VecX rigid_mask = global_translation_mask(init);
  VecX node_mask = VecX::Ones(rigid_mask.size());
  node_mask.segment(static_cast<Eigen::Index>(init.global_rotation_offset()), 7).setZero();
  VecX x = init.flatten();
  VecX m = VecX::Zero(x.size()), v = VecX::Zero(x.size());
  long t = 0;
  double scale = 1.0;
  const bool adam = cfg.method == "adam";

  res.initial = obj.evaluate(init);
  res.history.push_back(res.initial.total);
  std::size_t stage_start = 0;
  DeformationParams cur = init;

  for (int it = 0; it < cfg.max_iters; ++it) {
    res.iterations = it + 1;
    const bool rigid_stage = it < rigid_iters;
    Objective& active = rigid_stage ? rigid_obj : obj;
    if (it == rigid_iters && it > 0) {
      m.setZero();
      v.setZero();
      t = 0;
      scale = 1.0;
      obj.refresh(cur);
      stage_start = res.history.size();
      res.history.push_back(obj.evaluate(cur).total);
    } else if (it > 0) {
      active.refresh(cur, it % cfg.reassoc_every == 0);
    }
    VecX g;
    const double f = active.evaluate(cur, &g).total;
    if (rigid_stage) {
      g = g.cwiseProduct(rigid_mask);
    } else if (rigid_iters > 0) {
      g = g.cwiseProduct(node_mask);
    }

    VecX step;
    if (adam) {
      ++t;
      m = cfg.beta1 * m + (1 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1 - cfg.beta2) * g.cwiseProduct(g);
      const double c1 = 1 - std::pow(cfg.beta1, static_cast<double>(t));
      const double c2 = 1 - std::pow(cfg.beta2, static_cast<double>(t));
      step = (m / c1).array() / ((v / c2).array().sqrt() + cfg.epsilon);
      step = scale * lr.cwiseProduct(step);
    } else {
      step = scale * lr.cwiseProduct(g);
    }
    const VecX x_new = x - step;
    const DeformationParams cand = DeformationParams::unflatten(x_new);
    const double f_new = active.evaluate(cand).total;

    if (f_new <= f) {
      x = x_new;
      cur = cand;
      scale = std::min(1.0, scale * 1.5);
      ++res.accepted_steps;
      res.history.push_back(f_new);
      const std::size_t n = res.history.size();
      if (!rigid_stage && n - stage_start > static_cast<std::size_t>(cfg.tol_window)) {
        const double old = res.history[n - 1 - cfg.tol_window];
        if (old - f_new <= cfg.tol * std::max(old, 1e-300)) break;
      }
    } else {
      // Momentum can point uphill after an overshoot; restart it.
      if (adam) {
        m.setZero();
        v.setZero();
        t = 0;
      }
      scale *= 0.5;
      if (scale < 1e-6) {
        if (!rigid_stage) break;
        // A stalled rigid stage hands over to the full solve.
        it = rigid_iters - 1;
      }
    }
  }

  if (rigid_iters > 0 && res.iterations <= rigid_iters) obj.refresh(cur);
  // Compare against the start under the structure the final step used.
  const ObjectiveTerms at_init = obj.evaluate(init);
  const ObjectiveTerms at_cur = obj.evaluate(cur);
  if (at_cur.total <= at_init.total) {
    res.params = cur;
    res.final = at_cur;
  } else {
    res.params = init;
    res.final = at_init;
  }
  return res;
}

}  // namespace semsuper
