// Acceptance criteria 1-10. Usage: acceptance [N ...]; with no argument every
// criterion runs. Prints one PASS/FAIL line per criterion and exits non-zero
// when any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "../support/gradients.hpp"
#include "../support/scenes.hpp"
#include "../support/tempdir.hpp"
#include "semsuper/config.hpp"
#include "semsuper/pipeline.hpp"
#include "semsuper/renderer.hpp"
#include "semsuper/ssim.hpp"
#include "semsuper/synthetic.hpp"

using namespace semsuper;
using namespace semsuper::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Tracked {
  SyntheticSequence seq;
  TrackResult result;
  ReprojectionReport report;
};

Tracked track_synthetic(const RunConfig& cfg) {
  Tracked t;
  t.seq = generate_synthetic(cfg.synth, cfg.seed);
  t.result = track_frames(cfg.synth.frames, [&](int i) { return t.seq.frames[i]; }, cfg);
  t.report = reprojection_error(t.result.snapshots, t.seq.trajectories, t.seq.meta.intrinsics,
                                t.result.labels, cfg.evaluation);
  return t;
}

// Mean 3D distance between anchored surfels and their true points, per frame.
std::vector<double> anchored_3d_error(const Tracked& t) {
  std::vector<double> out;
  for (std::size_t f = 0; f < t.result.snapshots.size(); ++f) {
    double sum = 0;
    int n = 0;
    for (const auto& [tid, sid] : t.report.anchors) {
      for (const SurfelPose& p : *t.result.snapshots[f]) {
        if (p.id != sid) continue;
        sum += (p.position - t.seq.points[tid][f]).norm();
        ++n;
      }
    }
    out.push_back(n ? sum / n : std::numeric_limits<double>::infinity());
  }
  return out;
}

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  GradientErrors worst;
  std::size_t max_surfels = 0, max_nodes = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const GradientErrors e = gradient_errors(seed, 1e-5);
    worst.icp = std::max(worst.icp, e.icp);
    worst.morph = std::max(worst.morph, e.morph);
    worst.render = std::max(worst.render, e.render);
    worst.face = std::max(worst.face, e.face);
    worst.rot = std::max(worst.rot, e.rot);
    worst.total = std::max(worst.total, e.total);
    max_surfels = std::max(max_surfels, e.surfels);
    max_nodes = std::max(max_nodes, e.nodes);
  }
  const double secs = seconds_since(t0);
  const bool pass = worst.icp < 1e-3 && worst.morph < 1e-3 && worst.face < 1e-3 && worst.rot < 1e-3 &&
                    worst.total < 1e-3 && worst.render < 1e-2 && max_surfels <= 100 && max_nodes <= 9 &&
                    secs < 120;
  return {pass, fmt("max rel err icp %.1e morph %.1e render %.1e face %.1e rot %.1e total %.1e; "
                    "%zu surfels %zu nodes; %.1f s",
                    worst.icp, worst.morph, worst.render, worst.face, worst.rot, worst.total, max_surfels,
                    max_nodes, secs)};
}

Outcome identity_tracking() {
  RunConfig cfg;
  cfg.synth.frames = 10;
  cfg.synth.amplitude = 0.0;
  const Tracked t = track_synthetic(cfg);
  double max_b = 0;
  for (const FrameLog& f : t.result.frames) {
    for (const Vec3& b : f.params.node_translation) max_b = std::max(max_b, b.norm());
  }
  const double err = t.report.overall.mean;
  return {err < 0.5 && max_b < 1e-3 && t.report.points_anchored > 0,
          fmt("reprojection %.3f px over %zu points; max node translation %.2e m", err,
              t.report.points_anchored, max_b)};
}

Outcome rigid_recovery() {
  RunConfig cfg;
  cfg.synth.frames = 6;
  cfg.synth.amplitude = 0.0;
  cfg.synth.translation_per_frame = Vec3(0.003, 0.002, 0.00361);
  const Tracked t = track_synthetic(cfg);
  const std::vector<double> e = anchored_3d_error(t);
  const double worst = *std::max_element(e.begin(), e.end());
  std::string per;
  for (double x : e) per += fmt(" %.3f", 1000 * x);
  return {worst < 1e-3 && t.report.points_anchored > 0,
          fmt("%.2f mm/frame; per-frame mean 3D error (mm):%s", 1000 * cfg.synth.translation_per_frame.norm(),
              per.c_str())};
}

Outcome deformation_tracking() {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg;
  const Tracked t = track_synthetic(cfg);
  const double secs = seconds_since(t0);
  const double err = t.report.overall.mean;
  return {err < 2.0 && secs < 600 && t.report.points_anchored > 0,
          fmt("reprojection %.3f px (boundary %.3f) over %zu points; %.0f s", err, t.report.boundary.mean,
              t.report.points_anchored, secs)};
}

Outcome ablation_trend() {
  const nlohmann::json scenario = {{"width", 320},
                                   {"height", 240},
                                   {"fx", 250},
                                   {"fy", 250},
                                   {"cx", 160},
                                   {"cy", 120},
                                   {"frames", 12},
                                   {"period_frames", 24},
                                   {"bulge_x", 0.008},
                                   {"lateral_amplitude", 0.006},
                                   {"confine_to_class", false},
                                   {"label_noise_band_px", 6},
                                   {"label_flip_prob", 0.1}};
  std::vector<double> with, without;
  std::string per;
  for (std::uint64_t seed : {1, 2, 3}) {
    RunConfig on = run_config_from_json({{"seed", seed}, {"synth", scenario}});
    RunConfig off = on;
    apply_preset(off, "no-morph");
    with.push_back(track_synthetic(on).report.boundary.mean);
    without.push_back(track_synthetic(off).report.boundary.mean);
    per += fmt(" [%.3f vs %.3f]", with.back(), without.back());
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double a = median(with), b = median(without);
  return {a <= b, fmt("median boundary error morph %.3f px vs no-morph %.3f px; seeds:%s", a, b, per.c_str())};
}

double jsd_oracle(const std::vector<double>& p, const std::vector<double>& q) {
  double d = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0) d += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0) d += 0.5 * q[i] * std::log(q[i] / m);
  }
  return d;
}

Outcome semantic_weighting() {
  constexpr double tol = 1e-9;
  std::mt19937_64 rng(6);
  std::gamma_distribution<double> g(0.5, 1.0);
  std::vector<std::vector<double>> points;
  for (int c : {2, 3, 5}) {
    for (int i = 0; i < 30; ++i) {
      std::vector<double> p(c);
      double s = 0;
      for (double& x : p) s += (x = g(rng));
      for (double& x : p) x /= s;
      points.push_back(p);
    }
    std::vector<double> vertex(c, 0.0), center(c, 1.0 / c);
    vertex[0] = 1.0;
    points.push_back(vertex);
    points.push_back(center);
  }
  std::vector<std::pair<double, double>> curve;  // (jsd, rho)
  bool ok = true;
  double worst_self = 0, min_rho = 1, max_rho = 0, worst_formula = 0;
  for (const auto& p : points) {
    worst_self = std::max(worst_self, std::abs(semantic_weight(p, p) - 1.0));
    for (const auto& q : points) {
      if (q.size() != p.size()) continue;
      const double d = jsd_oracle(p, q), r = semantic_weight(p, q);
      worst_formula = std::max(worst_formula, std::abs(r - std::exp(-d)));
      min_rho = std::min(min_rho, r);
      max_rho = std::max(max_rho, r);
      curve.emplace_back(d, r);
    }
  }
  std::sort(curve.begin(), curve.end());
  int violations = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (curve[i].first > curve[i - 1].first + tol && !(curve[i].second < curve[i - 1].second)) ++violations;
  }
  ok = worst_self <= tol && min_rho >= 0.5 - tol && max_rho <= 1 + tol && violations == 0 && worst_formula <= tol;
  return {ok, fmt("%zu pairs; |rho(s,s)-1| %.1e; rho in [%.4f, %.4f]; |rho-exp(-jsd)| %.1e; "
                  "monotonicity violations %d",
                  curve.size(), worst_self, min_rho, max_rho, worst_formula, violations)};
}

Vec2 coverage_centroid(const RenderedImage& img) {
  double sx = 0, sy = 0, sw = 0;
  for (int y = 0; y < img.coverage.height; ++y) {
    for (int x = 0; x < img.coverage.width; ++x) {
      const double w = img.coverage.at(x, y);
      sx += w * x;
      sy += w * y;
      sw += w;
    }
  }
  return Vec2(sx / sw, sy / sw);
}

Outcome renderer_ssim() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  auto random_image = [&](int w, int h) {
    Image<double> img(w, h, 3);
    for (auto& x : img.data) x = u(rng);
    return img;
  };
  double self = 0, asym = 0, lmin = 1, lmax = 0;
  for (int i = 0; i < 100; ++i) {
    const Image<double> a = random_image(24, 18), b = random_image(24, 18);
    self = std::max(self, std::abs(ssim(a, a) - 1.0));
    asym = std::max(asym, std::abs(ssim(a, b) - ssim(b, a)));
    Image<float> af(24, 18, 3);
    for (std::size_t k = 0; k < a.data.size(); ++k) af.data[k] = static_cast<float>(a.data[k]);
    const double l = render_loss(af, b, Grid<std::uint8_t>(24, 18, 1));
    lmin = std::min(lmin, l);
    lmax = std::max(lmax, l);
  }

  // A cluster of splats shifted laterally by whole and sub-pixel amounts.
  const CameraIntrinsics K{100, 100, 31.5, 23.5, 64, 48};
  const RenderConfig cfg;
  double worst_shift = 0;
  std::uniform_real_distribution<double> spread(-0.01, 0.01);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Vec3> pos;
    std::vector<Surfel> attr;
    for (int i = 0; i < 6; ++i) {
      pos.emplace_back(spread(rng), spread(rng), 0.2 + 0.2 * spread(rng));
      Surfel s;
      s.radius = 0.002 + 0.1 * std::abs(spread(rng));
      s.color = Vec3(u(rng), u(rng), u(rng));
      s.normal = Vec3(0, 0, -1);
      attr.push_back(s);
    }
    const Vec2 c0 = coverage_centroid(splat_render(pos, attr, K, cfg));
    for (const Vec2& shift : {Vec2(2, 0), Vec2(0, -2), Vec2(1.4, 1.4), Vec2(0.5, 0), Vec2(-0.3, 1.7)}) {
      std::vector<Vec3> moved = pos;
      for (Vec3& p : moved) p += Vec3(shift.x() * p.z() / K.fx, shift.y() * p.z() / K.fy, 0);
      const Vec2 c1 = coverage_centroid(splat_render(moved, attr, K, cfg));
      worst_shift = std::max(worst_shift, (c1 - c0 - shift).norm());
    }
  }
  const bool pass = self <= 1e-6 && asym <= 1e-9 && lmin >= 0 && lmax <= 1 && worst_shift <= 0.1;
  return {pass, fmt("|ssim(I,I)-1| %.1e; asymmetry %.1e; render loss in [%.4f, %.4f]; "
                    "centroid shift error %.2e px",
                    self, asym, lmin, lmax, worst_shift)};
}

Outcome normal_estimation() {
  const CameraIntrinsics K = small_intrinsics(160, 120, 150.0);
  std::string per;
  bool pass = true;
  for (double tilt : {0.0, 15.0, 30.0}) {
    const Vec3 n = tilted_normal(tilt);
    const ObservationMaps maps = observe(plane_frame(K, n, 0.5, 80));
    double worst = 0;
    int count = 0;
    for (int v = 1; v < K.height - 1; ++v) {
      for (int u = 1; u < K.width - 1; ++u) {
        if (!maps.valid(u, v)) {
          pass = false;
          continue;
        }
        const double c = std::clamp(maps.normals(u, v).dot(n), -1.0, 1.0);
        worst = std::max(worst, std::acos(c) * 180.0 / std::numbers::pi);
        ++count;
      }
    }
    pass = pass && worst < 1.0;
    per += fmt(" %.0f deg: %.2e deg over %d px;", tilt, worst, count);
  }
  return {pass, "max angular error" + per};
}

// A plane with a box in front of it for the first frames; afterwards the box
// is gone and the plane behind it shows through.
Frame disappearing_frame(const CameraIntrinsics& K, int index, int box_frames) {
  Frame f = plane_frame(K, Vec3(0, 0, -1), 0.15, K.width / 2.0, index);
  if (index < box_frames) {
    for (int v = K.height / 4; v < K.height / 2; ++v) {
      for (int u = K.width / 8; u < K.width / 3; ++u) f.depth.at(u, v) = 0.12f;
    }
  }
  return f;
}

Outcome fusion_invariants() {
  const CameraIntrinsics K = small_intrinsics(80, 60, 100.0);
  FusionConfig fc;
  fc.surfel_stride = 4;
  fc.target_edge_m = 0.004;

  // Identical observation.
  const Frame f0 = plane_frame(K, tilted_normal(10), 0.2, 40, 0);
  const ObservationMaps m0 = observe(f0);
  Model m = init_model(f0, m0, fc);
  const Model before = m;
  Frame f1 = f0;
  f1.index = 1;
  fuse_frame(m, f1, m0, fc);
  double moved = 0, turned = 0, scores = 0, conf = 0;
  for (std::size_t i = 0; i < m.surfels.size(); ++i) {
    moved = std::max(moved, (m.surfels[i].position - before.surfels[i].position).norm());
    turned = std::max(turned, (m.surfels[i].normal - before.surfels[i].normal).norm());
    for (std::size_t c = 0; c < m.surfels[i].sem_scores.size(); ++c) {
      scores = std::max(scores, std::abs(m.surfels[i].sem_scores[c] - before.surfels[i].sem_scores[c]));
    }
    conf = std::max(conf, std::abs(m.surfels[i].confidence - before.surfels[i].confidence - 1.0));
  }
  const bool identical = m.surfels.size() == before.surfels.size() && moved < 1e-12 && turned < 1e-12 &&
                         scores < 1e-12 && conf == 0.0;

  // Random class probabilities.
  FusionConfig keep = fc;
  keep.stale_frames = 1000;
  Model r = init_model(f0, m0, keep);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(0, 1);
  Frame fr = f0;
  for (int t = 1; t <= 100; ++t) {
    fr.index = t;
    for (auto& p : fr.sem_probs.data) p = u(rng);
    normalize_probabilities(fr.sem_probs);
    fuse_frame(r, fr, m0, keep);
  }
  double simplex = 0;
  bool nonneg = true;
  for (const Surfel& s : r.surfels) {
    double sum = 0;
    for (double x : s.sem_scores) {
      nonneg = nonneg && x >= 0;
      sum += x;
    }
    simplex = std::max(simplex, std::abs(sum - 1.0));
  }

  // Disappearing object through the full tracker.
  constexpr int kFrames = 16, kBoxFrames = 3;
  RunConfig cfg;
  cfg.fusion.surfel_stride = 2;
  const TrackResult res = track_frames(kFrames, [&](int i) { return disappearing_frame(K, i, kBoxFrames); }, cfg);
  std::size_t deleted = 0;
  for (const FrameLog& f : res.frames) deleted += f.deleted;
  std::size_t box_left = 0;
  for (const Surfel& s : res.model.surfels) box_left += s.position.z() < 0.135;

  const bool pass = identical && simplex < 1e-9 && nonneg && deleted > 0 && box_left == 0;
  return {pass, fmt("identical observation: max change pos %.1e normal %.1e scores %.1e, conf +1 %s; "
                    "simplex drift after 100 fusions %.1e; disappearing object: %zu deleted, %zu box surfels left",
                    moved, turned, scores, conf == 0.0 ? "yes" : "no", simplex, deleted, box_left)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  TempDir dir("determinism");
  RunConfig cfg;
  cfg.synth.width = 320;
  cfg.synth.height = 240;
  cfg.synth.fx = cfg.synth.fy = 250;
  cfg.synth.cx = 160;
  cfg.synth.cy = 120;
  cfg.synth.frames = 6;
  cfg.seed = 3;
  cfg.out = dir / "seq";
  cfg.sequence = dir / "seq";
  run_synth(cfg);
  std::ofstream(dir / "cfg.json") << run_config_to_json(cfg).dump(2);

  auto run = [&](const std::string& out) {
    const std::string cmd = std::string(SEMSUPER_CLI) + " track --deterministic --config " +
                            (dir / "cfg.json").string() + " --out " + (dir / out).string() + " > /dev/null";
    return std::system(cmd.c_str());
  };
  if (run("a") != 0 || run("b") != 0) return {false, "track command failed"};
  const std::string a = slurp(dir / "a/metrics.json"), b = slurp(dir / "b/metrics.json");
  const bool logs = slurp(dir / "a/params.log") == slurp(dir / "b/params.log");
  return {!a.empty() && a == b, fmt("metrics.json %zu bytes, %s; params.log %s", a.size(),
                                    a == b ? "identical" : "different", logs ? "identical" : "different")};
}

const std::vector<std::pair<const char*, std::function<Outcome()>>> kCriteria = {
    {"gradient suite", gradients},
    {"identity tracking", identity_tracking},
    {"rigid recovery", rigid_recovery},
    {"deformation tracking", deformation_tracking},
    {"morph ablation trend", ablation_trend},
    {"semantic weighting", semantic_weighting},
    {"renderer and ssim", renderer_ssim},
    {"normal estimation", normal_estimation},
    {"fusion invariants", fusion_invariants},
    {"determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty()) {
    for (int i = 1; i <= static_cast<int>(kCriteria.size()); ++i) which.push_back(i);
  }
  int failed = 0;
  for (int n : which) {
    if (n < 1 || n > static_cast<int>(kCriteria.size())) {
      std::fprintf(stderr, "no criterion %d\n", n);
      return 2;
    }
    const auto& [name, check] = kCriteria[n - 1];
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
