#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "semsuper/association.hpp"
#include "semsuper/deformation.hpp"
#include "semsuper/frame.hpp"
#include "semsuper/fusion.hpp"
#include "semsuper/observation.hpp"

namespace semsuper::testing {

inline CameraIntrinsics small_intrinsics(int w = 80, int h = 60, double f = 100.0) {
  return CameraIntrinsics{f, f, (w - 1) / 2.0, (h - 1) / 2.0, w, h};
}

// Plane through (0, 0, z0) with unit normal `n`. Pixels left of `split_u` are
// class 0, the rest class 1. The color is a smooth pattern in image space.
inline Frame plane_frame(const CameraIntrinsics& K, const Vec3& n, double z0, double split_u,
                         int index = 0, double confidence = 0.9) {
  Frame f;
  f.index = index;
  f.intrinsics = K;
  f.rgb = Image<float>(K.width, K.height, 3);
  f.depth = Image<float>(K.width, K.height, 1);
  f.sem_probs = Image<float>(K.width, K.height, 2);
  const Vec3 p0(0, 0, z0);
  for (int v = 0; v < K.height; ++v) {
    for (int u = 0; u < K.width; ++u) {
      const Vec3 d((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
      f.depth.at(u, v) = static_cast<float>(n.dot(p0) / n.dot(d));
      const int label = u < split_u ? 0 : 1;
      const double base = label == 0 ? 0.7 : 0.35;
      f.rgb.at(u, v, 0) = static_cast<float>(base + 0.2 * std::sin(0.45 * u) * std::cos(0.3 * v));
      f.rgb.at(u, v, 1) = static_cast<float>(0.4 + 0.15 * std::cos(0.37 * u + 0.2 * v));
      f.rgb.at(u, v, 2) = static_cast<float>(1.0 - base + 0.1 * std::sin(0.25 * v));
      f.sem_probs.at(u, v, label) = static_cast<float>(confidence);
      f.sem_probs.at(u, v, 1 - label) = static_cast<float>(1.0 - confidence);
    }
  }
  return f;
}

inline Vec3 tilted_normal(double degrees) {
  const double a = degrees * std::numbers::pi / 180.0;
  return Vec3(0.0, std::sin(a), -std::cos(a));
}

// Small model for gradient checks: at most `max_surfels` surfels sampled from
// a frame, a 3 x 3 node grid with its triangles and 4-nearest skinning.
struct SmallScene {
  std::vector<Surfel> surfels;
  std::vector<SkinningEntry> skinning;
  EDGraph graph;
  SceneView view() const { return SceneView{surfels, skinning, graph}; }
};

inline SmallScene small_scene(const Frame& frame, const ObservationMaps& maps, std::mt19937_64& rng,
                              std::size_t max_surfels = 100) {
  SmallScene s;
  const CameraIntrinsics& K = frame.intrinsics;
  std::vector<std::pair<int, int>> pixels;
  for (int v = 2; v < K.height - 2; v += 3) {
    for (int u = 2; u < K.width - 2; u += 3) {
      if (maps.valid(u, v)) pixels.emplace_back(u, v);
    }
  }
  std::shuffle(pixels.begin(), pixels.end(), rng);
  pixels.resize(std::min(pixels.size(), max_surfels));
  for (const auto& [u, v] : pixels) {
    Surfel sf;
    sf.id = s.surfels.size();
    sf.position = maps.points(u, v);
    sf.normal = maps.normals(u, v);
    for (int c = 0; c < 3; ++c) sf.color[c] = frame.rgb.at(u, v, c);
    sf.radius = 4.0 * sf.position.z() * std::sqrt(2.0) / K.fx;
    sf.confidence = 1.0;
    sf.sem_scores = frame.probs_at(u, v);
    sf.label = argmax(sf.sem_scores);
    s.surfels.push_back(sf);
  }
  int index[3][3];
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) {
      const int u = static_cast<int>(K.width * (0.2 + 0.3 * i));
      const int v = static_cast<int>(K.height * (0.2 + 0.3 * j));
      index[j][i] = static_cast<int>(s.graph.nodes.size());
      s.graph.nodes.push_back(EDNode{maps.points(u, v), frame.label_at(u, v)});
    }
  }
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) {
      if (i + 1 < 3) s.graph.add_edge(index[j][i], index[j][i + 1]);
      if (j + 1 < 3) s.graph.add_edge(index[j][i], index[j + 1][i]);
      if (i + 1 < 3 && j + 1 < 3) {
        s.graph.add_edge(index[j][i], index[j + 1][i + 1]);
        s.graph.add_edge(index[j][i + 1], index[j + 1][i]);
        s.graph.triangles.push_back(Triangle{{index[j][i], index[j][i + 1], index[j + 1][i + 1]}, 0});
        s.graph.triangles.push_back(Triangle{{index[j][i], index[j + 1][i + 1], index[j + 1][i]}, 0});
      }
    }
  }
  s.graph.refresh_rest_areas();
  for (const Surfel& sf : s.surfels) s.skinning.push_back(skinning_weights(sf.position, s.graph, 4));
  return s;
}

// Near-identity parameters: quaternions off unit norm by a few percent,
// millimeter translations and a small global motion.
inline DeformationParams random_params(std::size_t nodes, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  DeformationParams p = DeformationParams::identity(nodes);
  for (std::size_t j = 0; j < nodes; ++j) {
    p.node_rotation[j] = Vec4(1.0 + 0.03 * n(rng), 0.02 * n(rng), 0.02 * n(rng), 0.02 * n(rng));
    p.node_translation[j] = 1e-3 * Vec3(n(rng), n(rng), n(rng));
  }
  p.global_rotation = Vec4(1.0 + 0.01 * n(rng), 0.005 * n(rng), 0.005 * n(rng), 0.005 * n(rng));
  p.global_translation = 1e-3 * Vec3(n(rng), n(rng), n(rng));
  return p;
}

// Largest absolute deviation between `analytic` and central differences of
// `f`, relative to the largest finite-difference component.
template <typename F>
double fd_relative_error(F&& f, const DeformationParams& at, const VecX& analytic, double h = 1e-5) {
  const VecX x = at.flatten();
  VecX fd(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    VecX xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    fd[k] = (f(DeformationParams::unflatten(xp)) - f(DeformationParams::unflatten(xm))) / (2 * h);
  }
  const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-12);
  return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

}  // namespace semsuper::testing
