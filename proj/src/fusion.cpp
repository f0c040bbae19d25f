#include "semsuper/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "semsuper/deformation.hpp"
#include "semsuper/semantics.hpp"

namespace semsuper {

void FusionConfig::validate() const {
  if (surfel_stride < 1) throw Error("surfel_stride must be >= 1");
  if (!(r_min > 0) || r_max < r_min) throw Error("invalid surfel radius bounds");
  if (!(target_edge_m > 0)) throw Error("target_edge_m must be positive");
  if (knn < 1) throw Error("knn must be >= 1");
  if (merge_px < 0 || merge_depth_m < 0) throw Error("merge thresholds must be non-negative");
  if (stale_frames < 1) throw Error("stale_frames must be >= 1");
}

namespace {

// Separable triangle filter with half-width `stride`, so that surfels placed
// every `stride` pixels carry colors without aliasing sharp edges.
Image<float> surfel_colors(const Image<float>& rgb, int stride) {
  if (stride <= 1) return rgb;
  const int W = rgb.width, H = rgb.height, C = rgb.channels;
  auto pass = [&](const Image<float>& in, int du, int dv) {
    Image<float> out(W, H, C, 0.0f);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double acc[4] = {0, 0, 0, 0}, wsum = 0.0;
        for (int k = 1 - stride; k < stride; ++k) {
          const int xx = x + k * du, yy = y + k * dv;
          if (xx < 0 || yy < 0 || xx >= W || yy >= H) continue;
          const double w = stride - std::abs(k);
          for (int c = 0; c < C && c < 4; ++c) acc[c] += w * in.at(xx, yy, c);
          wsum += w;
        }
        for (int c = 0; c < C && c < 4; ++c) out.at(x, y, c) = static_cast<float>(acc[c] / wsum);
      }
    }
    return out;
  };
  return pass(pass(rgb, 1, 0), 0, 1);
}

Surfel make_surfel(const Frame& frame, const Image<float>& colors, const ObservationMaps& maps,
                   int u, int v, const FusionConfig& cfg, std::uint64_t id) {
  Surfel s;
  s.id = id;
  s.position = maps.points(u, v);
  s.normal = maps.normals(u, v);
  for (int c = 0; c < 3; ++c) s.color[c] = colors.at(u, v, c);
  const double nz = std::max(std::abs(s.normal.z()), 1e-3);
  const double r = cfg.surfel_stride * s.position.z() * std::numbers::sqrt2 /
                   (frame.intrinsics.fx * nz);
  s.radius = std::clamp(r, cfg.r_min, cfg.r_max);
  s.confidence = 1.0;
  s.timestamp = frame.index;
  s.sem_scores = frame.probs_at(u, v);
  normalize_simplex(s.sem_scores);
  s.label = argmax(s.sem_scores);
  return s;
}

}  // namespace

std::vector<Surfel> init_surfels(const Frame& frame, const ObservationMaps& maps,
                                 const FusionConfig& cfg, std::uint64_t first_id) {
  cfg.validate();
  const Image<float> colors = surfel_colors(frame.rgb, cfg.surfel_stride);
  std::vector<Surfel> out;
  for (int v = 0; v < maps.height(); v += cfg.surfel_stride) {
    for (int u = 0; u < maps.width(); u += cfg.surfel_stride) {
      if (!maps.valid(u, v)) continue;
      out.push_back(make_surfel(frame, colors, maps, u, v, cfg, first_id++));
    }
  }
  if (out.empty()) throw Error("no valid pixels to initialize surfels");
  return out;
}

int ed_grid_stride(const ObservationMaps& maps, double target_edge_m) {
  if (!(target_edge_m > 0)) throw Error("target_edge_m must be positive");
  double sum = 0.0;
  std::size_t count = 0;
  for (int v = 0; v < maps.height(); ++v) {
    for (int u = 0; u < maps.width(); ++u) {
      if (!maps.valid(u, v)) continue;
      if (u + 1 < maps.width() && maps.valid(u + 1, v)) {
        sum += (maps.points(u + 1, v) - maps.points(u, v)).norm();
        ++count;
      }
      if (v + 1 < maps.height() && maps.valid(u, v + 1)) {
        sum += (maps.points(u, v + 1) - maps.points(u, v)).norm();
        ++count;
      }
    }
  }
  if (count == 0 || !(sum > 0)) throw Error("insufficient graph: no valid neighboring pixels");
  const double spacing = sum / static_cast<double>(count);
  return std::max(1, static_cast<int>(std::lround(target_edge_m / spacing)));
}

EDGraph init_ed_graph(const ObservationMaps& maps, double target_edge_m,
                      const Grid<std::int32_t>* labels) {
  const int stride = ed_grid_stride(maps, target_edge_m);
  const int W = maps.width(), H = maps.height();
  // Center the lattice in the image.
  const int u0 = ((W - 1) % stride) / 2, v0 = ((H - 1) % stride) / 2;
  const int nu = (W - 1 - u0) / stride + 1, nv = (H - 1 - v0) / stride + 1;
  Grid<int> index(nu, nv, -1);

  EDGraph g;
  for (int j = 0; j < nv; ++j) {
    for (int i = 0; i < nu; ++i) {
      const int u = u0 + i * stride, v = v0 + j * stride;
      if (!maps.valid(u, v)) continue;
      EDNode node;
      node.rest = maps.points(u, v);
      if (labels) {
        std::map<int, int> votes;
        const int h = stride / 2;
        for (int y = std::max(0, v - h); y <= std::min(H - 1, v + h); ++y) {
          for (int x = std::max(0, u - h); x <= std::min(W - 1, u + h); ++x) ++votes[(*labels)(x, y)];
        }
        int best = -1;
        for (const auto& [lbl, n] : votes) {
          if (best < 0 || n > votes[best]) best = lbl;
        }
        node.label = best;
      }
      index(i, j) = static_cast<int>(g.nodes.size());
      g.nodes.push_back(node);
    }
  }
  if (g.nodes.size() < 4) throw Error("insufficient graph: fewer than 4 valid nodes");

  const int du[4] = {1, -1, 0, 1};
  const int dv[4] = {0, 1, 1, 1};
  for (int j = 0; j < nv; ++j) {
    for (int i = 0; i < nu; ++i) {
      const int a = index(i, j);
      if (a < 0) continue;
      for (int k = 0; k < 4; ++k) {
        const int ii = i + du[k], jj = j + dv[k];
        if (!index.contains(ii, jj) || index(ii, jj) < 0) continue;
        g.add_edge(a, index(ii, jj));
      }
    }
  }
  for (int j = 0; j + 1 < nv; ++j) {
    for (int i = 0; i + 1 < nu; ++i) {
      const int a = index(i, j), b = index(i + 1, j), c = index(i, j + 1), d = index(i + 1, j + 1);
      for (const std::array<int, 3> tri : {std::array<int, 3>{a, b, d}, std::array<int, 3>{a, d, c}}) {
        if (tri[0] < 0 || tri[1] < 0 || tri[2] < 0) continue;
        const double area =
            triangle_area(g.nodes[tri[0]].rest, g.nodes[tri[1]].rest, g.nodes[tri[2]].rest);
        if (!(area > 0)) continue;
        g.triangles.push_back(Triangle{tri, area});
      }
    }
  }
  return g;
}

SkinningEntry skin_surfel(const Surfel& s, const EDGraph& graph, const FusionConfig& cfg) {
  const int k = std::min<int>(cfg.knn, static_cast<int>(graph.size()));
  return skinning_weights(s.position, graph, k, cfg.label_restricted_skinning ? s.label : -1);
}

Model init_model(const Frame& frame, const ObservationMaps& maps, const FusionConfig& cfg) {
  Model m;
  m.surfels = init_surfels(frame, maps, cfg, 0);
  m.next_id = m.surfels.size();
  const Grid<std::int32_t> labels = label_map(frame.sem_probs);
  m.graph = init_ed_graph(maps, cfg.target_edge_m, &labels);
  m.skinning.reserve(m.surfels.size());
  for (const Surfel& s : m.surfels) m.skinning.push_back(skin_surfel(s, m.graph, cfg));
  return m;
}

void commit(const DeformationParams& params, Model& model) {
  if (params.node_count() != model.graph.size()) throw Error("commit: parameter/node count mismatch");
  const Deformer deformer(model.graph, params);
  for (std::size_t i = 0; i < model.surfels.size(); ++i) {
    Surfel& s = model.surfels[i];
    const Vec3 n = deformer.normal(s.normal, model.skinning[i]);
    s.position = deformer.point(s.position, model.skinning[i]);
    s.normal = n;
  }
  std::vector<Vec3> moved(model.graph.size());
  for (std::size_t j = 0; j < moved.size(); ++j) moved[j] = deformer.node_position(static_cast<int>(j));
  for (std::size_t j = 0; j < moved.size(); ++j) model.graph.nodes[j].rest = moved[j];
  model.graph.refresh_rest_areas();
}

FuseStats fuse_frame(Model& model, const Frame& frame, const ObservationMaps& maps,
                     const FusionConfig& cfg) {
  cfg.validate();
  const CameraIntrinsics& K = frame.intrinsics;
  const int W = maps.width(), H = maps.height();
  const double cos_merge = std::cos(cfg.merge_angle_deg * std::numbers::pi / 180.0);
  const double reach = cfg.merge_px * cfg.surfel_stride;
  const int ireach = static_cast<int>(std::floor(reach));
  Grid<std::uint8_t> explained(W, H, 0);
  const Image<float> colors = surfel_colors(frame.rgb, cfg.surfel_stride);
  FuseStats stats;

  for (Surfel& s : model.surfels) {
    if (s.position.z() <= 1e-6) continue;
    const Vec2 uv = project(s.position, K);
    const auto obs = sample_observation(frame, maps, uv);
    if (!obs) continue;
    if (std::abs(obs->point.z() - s.position.z()) >= cfg.merge_depth_m) continue;
    if (obs->normal.dot(s.normal) <= cos_merge) continue;

    const double w = s.confidence, wt = w + 1.0;
    s.position = (w * s.position + obs->point) / wt;
    const Vec3 n = w * s.normal + obs->normal;
    if (n.norm() > 1e-12) s.normal = n.normalized();
    Vec3 color = Vec3::Zero();
    bilinear_footprint(uv, W, H)->for_each([&](int x, int y, double bw) {
      for (int c = 0; c < 3; ++c) color[c] += bw * colors.at(x, y, c);
    });
    s.color = (w * s.color + color) / wt;
    for (std::size_t c = 0; c < s.sem_scores.size() && c < obs->sem.size(); ++c) {
      s.sem_scores[c] = (w * s.sem_scores[c] + obs->sem[c]) / wt;
    }
    normalize_simplex(s.sem_scores);
    s.label = argmax(s.sem_scores);
    s.confidence += 1.0;
    s.timestamp = frame.index;
    ++stats.fused;

    const int cu = static_cast<int>(std::lround(uv.x())), cv = static_cast<int>(std::lround(uv.y()));
    for (int y = std::max(0, cv - ireach - 1); y <= std::min(H - 1, cv + ireach + 1); ++y) {
      for (int x = std::max(0, cu - ireach - 1); x <= std::min(W - 1, cu + ireach + 1); ++x) {
        const double dx = x - uv.x(), dy = y - uv.y();
        if (dx * dx + dy * dy <= reach * reach) explained(x, y) = 1;
      }
    }
  }

  // Stale, never-stabilized surfels go first so that new indices are final.
  std::vector<Surfel> kept;
  std::vector<SkinningEntry> kept_skin;
  kept.reserve(model.surfels.size());
  kept_skin.reserve(model.surfels.size());
  for (std::size_t i = 0; i < model.surfels.size(); ++i) {
    const Surfel& s = model.surfels[i];
    if (frame.index - s.timestamp >= cfg.stale_frames && s.confidence < cfg.conf_stable) {
      ++stats.deleted;
      continue;
    }
    kept.push_back(std::move(model.surfels[i]));
    kept_skin.push_back(std::move(model.skinning[i]));
  }
  model.surfels = std::move(kept);
  model.skinning = std::move(kept_skin);

  for (int v = 0; v < H; v += cfg.surfel_stride) {
    for (int u = 0; u < W; u += cfg.surfel_stride) {
      if (!maps.valid(u, v) || explained(u, v)) continue;
      stats.new_surfels.push_back(model.surfels.size());
      model.surfels.push_back(make_surfel(frame, colors, maps, u, v, cfg, model.next_id++));
      model.skinning.emplace_back();
      ++stats.added;
    }
  }
  return stats;
}

std::size_t extend_graph(Model& model, const std::vector<std::size_t>& new_surfels,
                         const FusionConfig& cfg) {
  EDGraph& g = model.graph;
  const double radius = cfg.node_radius();
  const std::size_t first_new_node = g.size();
  for (std::size_t idx : new_surfels) {
    const Surfel& s = model.surfels.at(idx);
    bool near = false;
    for (const EDNode& n : g.nodes) {
      if ((n.rest - s.position).norm() <= radius) {
        near = true;
        break;
      }
    }
    if (near) continue;
    std::vector<std::pair<double, int>> dist;
    dist.reserve(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
      dist.emplace_back((g.nodes[j].rest - s.position).squaredNorm(), static_cast<int>(j));
    }
    const std::size_t links = std::min<std::size_t>(cfg.node_link_count, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(links), dist.end());
    const int id = static_cast<int>(g.size());
    g.nodes.push_back(EDNode{s.position, s.label});
    for (std::size_t l = 0; l < links; ++l) g.add_edge(dist[l].second, id);
  }
  const std::size_t added = g.size() - first_new_node;

  std::vector<char> redo(model.surfels.size(), 0);
  for (std::size_t idx : new_surfels) redo[idx] = 1;
  if (added > 0) {
    for (std::size_t i = 0; i < model.surfels.size(); ++i) {
      if (redo[i] || model.skinning[i].empty()) {
        redo[i] = 1;
        continue;
      }
      // A surfel needs new weights if a new node is closer than its farthest
      // current neighbor.
      double farthest = 0.0;
      for (int j : model.skinning[i].nodes) {
        farthest = std::max(farthest, (g.nodes[j].rest - model.surfels[i].position).norm());
      }
      for (std::size_t j = first_new_node; j < g.size(); ++j) {
        if ((g.nodes[j].rest - model.surfels[i].position).norm() < farthest) {
          redo[i] = 1;
          break;
        }
      }
    }
  }
  for (std::size_t i = 0; i < model.surfels.size(); ++i) {
    if (redo[i] || model.skinning[i].empty()) model.skinning[i] = skin_surfel(model.surfels[i], g, cfg);
  }
  return added;
}

}  // namespace semsuper
