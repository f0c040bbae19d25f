#include "semsuper/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "semsuper/deformation.hpp"
#include "semsuper/semantics.hpp"

namespace semsuper {

namespace {

// h in degrees, s and v in [0, 1].
void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0 ? d / mx : 0.0;
  if (d <= 0) {
    h = 0;
    return;
  }
  if (mx == r) {
    h = 60.0 * std::fmod((g - b) / d, 6.0);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / d + 2.0);
  } else {
    h = 60.0 * ((r - g) / d + 4.0);
  }
  if (h < 0) h += 360.0;
}

ErrorStats stats_of(const std::vector<double>& xs) {
  ErrorStats s;
  s.count = xs.size();
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(var / static_cast<double>(xs.size()));
  return s;
}

}  // namespace

std::vector<Vec2> detect_markers(const Image<float>& rgb, const MarkerDetectorConfig& cfg) {
  const int W = rgb.width, H = rgb.height;
  Grid<std::uint8_t> mask(W, H, 0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double h, s, v;
      rgb_to_hsv(rgb.at(x, y, 0), rgb.at(x, y, 1), rgb.at(x, y, 2), h, s, v);
      mask(x, y) = h >= cfg.hue_min_deg && h <= cfg.hue_max_deg && s >= cfg.sat_min &&
                   v >= cfg.val_min;
    }
  }

  std::vector<Vec2> out;
  Grid<std::uint8_t> seen(W, H, 0);
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (!mask(x, y) || seen(x, y)) continue;
      long area = 0, crack = 0;
      double su = 0, sv = 0;
      stack.assign(1, {x, y});
      seen(x, y) = 1;
      while (!stack.empty()) {
        const auto [u, v] = stack.back();
        stack.pop_back();
        ++area;
        su += u;
        sv += v;
        const int du4[4] = {1, -1, 0, 0}, dv4[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nu = u + du4[k], nv = v + dv4[k];
          if (!mask.contains(nu, nv) || !mask(nu, nv)) ++crack;
        }
        for (int dv = -1; dv <= 1; ++dv) {
          for (int du = -1; du <= 1; ++du) {
            const int nu = u + du, nv = v + dv;
            if (!mask.contains(nu, nv) || !mask(nu, nv) || seen(nu, nv)) continue;
            seen(nu, nv) = 1;
            stack.emplace_back(nu, nv);
          }
        }
      }
      if (area < cfg.area_min || area > cfg.area_max) continue;
      const double perimeter = crack * std::numbers::pi / 4.0;
      const double circularity = 4.0 * std::numbers::pi * area / (perimeter * perimeter);
      if (circularity < cfg.circularity_min) continue;
      out.emplace_back(su / area, sv / area);
    }
  }
  return out;
}

std::optional<int> Trajectory::first_frame() const {
  for (std::size_t f = 0; f < positions.size(); ++f) {
    if (positions[f]) return static_cast<int>(f);
  }
  return std::nullopt;
}

std::vector<Trajectory> track_markers(const std::vector<std::vector<Vec2>>& detections,
                                      double max_jump_px) {
  const std::size_t F = detections.size();
  std::vector<Trajectory> tracks;
  std::vector<Vec2> last;
  for (std::size_t f = 0; f < F; ++f) {
    const auto& dets = detections[f];
    struct Pair {
      double d;
      std::size_t track, det;
    };
    std::vector<Pair> pairs;
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      for (std::size_t d = 0; d < dets.size(); ++d) {
        const double dist = (dets[d] - last[t]).norm();
        if (dist <= max_jump_px) pairs.push_back({dist, t, d});
      }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.d < b.d; });
    std::vector<char> track_used(tracks.size(), 0), det_used(dets.size(), 0);
    for (const Pair& p : pairs) {
      if (track_used[p.track] || det_used[p.det]) continue;
      track_used[p.track] = det_used[p.det] = 1;
      tracks[p.track].positions[f] = dets[p.det];
      last[p.track] = dets[p.det];
    }
    for (std::size_t d = 0; d < dets.size(); ++d) {
      if (det_used[d]) continue;
      Trajectory t;
      t.id = static_cast<int>(tracks.size());
      t.positions.assign(F, std::nullopt);
      t.positions[f] = dets[d];
      tracks.push_back(std::move(t));
      last.push_back(dets[d]);
    }
  }
  return tracks;
}

void write_trajectories_csv(const std::filesystem::path& path,
                            const std::vector<Trajectory>& trajectories) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "frame,id,u,v\n";
  char buf[128];
  std::size_t frames = 0;
  for (const auto& t : trajectories) frames = std::max(frames, t.positions.size());
  for (std::size_t f = 0; f < frames; ++f) {
    for (const auto& t : trajectories) {
      if (f >= t.positions.size() || !t.positions[f]) continue;
      std::snprintf(buf, sizeof(buf), "%zu,%d,%.6f,%.6f\n", f, t.id, t.positions[f]->x(),
                    t.positions[f]->y());
      out << buf;
    }
  }
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<Trajectory> read_trajectories_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::map<int, std::vector<std::pair<int, Vec2>>> rows;
  int max_frame = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line.rfind("frame", 0) == 0) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    int f, id;
    double u, v;
    if (!(ss >> f >> id >> u >> v) || f < 0) throw Error("malformed trajectory row: " + line);
    rows[id].emplace_back(f, Vec2(u, v));
    max_frame = std::max(max_frame, f);
  }
  if (rows.empty()) throw Error("no ground truth");
  std::vector<Trajectory> out;
  for (const auto& [id, pts] : rows) {
    Trajectory t;
    t.id = id;
    t.positions.assign(static_cast<std::size_t>(max_frame) + 1, std::nullopt);
    for (const auto& [f, uv] : pts) t.positions[f] = uv;
    out.push_back(std::move(t));
  }
  return out;
}

ModelSnapshot snapshot_of(const std::vector<Surfel>& surfels) {
  ModelSnapshot s;
  s.reserve(surfels.size());
  for (const Surfel& x : surfels) s.push_back({x.id, x.position});
  return s;
}

ReprojectionReport reprojection_error(const std::vector<std::optional<ModelSnapshot>>& snapshots,
                                      const std::vector<Trajectory>& trajectories,
                                      const CameraIntrinsics& K,
                                      const std::vector<Grid<std::int32_t>>& labels,
                                      const ReprojectionConfig& cfg) {
  ReprojectionReport rep;
  const std::size_t F = snapshots.size();
  std::vector<DistanceField> edges(F);
  for (std::size_t f = 0; f < F && f < labels.size(); ++f) {
    if (!labels[f].data.empty()) edges[f] = semantic_edge_distance(labels[f]);
  }
  std::vector<std::unordered_map<std::uint64_t, Vec3>> lookup(F);
  for (std::size_t f = 0; f < F; ++f) {
    if (!snapshots[f]) continue;
    for (const SurfelPose& p : *snapshots[f]) lookup[f].emplace(p.id, p.position);
  }

  std::vector<double> all, near;
  std::vector<std::vector<double>> per_frame(F);
  for (const Trajectory& t : trajectories) {
    // Anchor at the first frame where both the trajectory and a snapshot exist.
    std::optional<std::uint64_t> anchor;
    std::size_t f0 = 0;
    for (; f0 < F && f0 < t.positions.size(); ++f0) {
      if (t.positions[f0] && snapshots[f0]) break;
    }
    if (f0 < F && f0 < t.positions.size()) {
      double best = cfg.anchor_radius_px;
      for (const SurfelPose& p : *snapshots[f0]) {
        if (p.position.z() <= 1e-6) continue;
        const double d = (project(p.position, K) - *t.positions[f0]).norm();
        if (d <= best) {
          best = d;
          anchor = p.id;
        }
      }
    }
    if (!anchor) {
      rep.excluded_ids.push_back(t.id);
      continue;
    }
    ++rep.points_anchored;
    rep.anchors.emplace_back(t.id, *anchor);
    for (std::size_t f = f0; f < F && f < t.positions.size(); ++f) {
      if (!t.positions[f] || !snapshots[f]) continue;
      const auto it = lookup[f].find(*anchor);
      if (it == lookup[f].end() || it->second.z() <= 1e-6) continue;
      const Vec2& gt = *t.positions[f];
      const double e = (project(it->second, K) - gt).norm();
      all.push_back(e);
      per_frame[f].push_back(e);
      if (!edges[f].empty()) {
        const int u = std::clamp(static_cast<int>(std::lround(gt.x())), 0, edges[f].distance.width - 1);
        const int v = std::clamp(static_cast<int>(std::lround(gt.y())), 0, edges[f].distance.height - 1);
        if (edges[f].distance(u, v) <= cfg.boundary_band_px) near.push_back(e);
      }
    }
  }
  rep.overall = stats_of(all);
  rep.boundary = stats_of(near);
  rep.per_frame_mean.resize(F);
  for (std::size_t f = 0; f < F; ++f) {
    if (!per_frame[f].empty()) rep.per_frame_mean[f] = stats_of(per_frame[f]).mean;
  }
  return rep;
}

std::string report_json(const ReprojectionReport& rep) {
  using nlohmann::json;
  auto stats = [](const ErrorStats& s) {
    return json{{"mean", s.mean}, {"std", s.std}, {"count", s.count}};
  };
  json per_frame = json::array();
  for (const auto& m : rep.per_frame_mean) per_frame.push_back(m ? json(*m) : json(nullptr));
  json anchors = json::array();
  for (const auto& [tid, sid] : rep.anchors) anchors.push_back({{"trajectory", tid}, {"surfel", sid}});
  const json j = {{"overall", stats(rep.overall)},
                  {"boundary", stats(rep.boundary)},
                  {"per_frame_mean", per_frame},
                  {"points_anchored", rep.points_anchored},
                  {"excluded_trajectories", rep.excluded_ids},
                  {"anchors", anchors}};
  return j.dump(2) + "\n";
}

}  // namespace semsuper
