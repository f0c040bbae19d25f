#include "semsuper/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "semsuper/deformation.hpp"

namespace semsuper {

void SynthConfig::validate() const {
  if (width <= 0 || height <= 0) throw Error("synth: image size must be positive");
  if (frames < 1) throw Error("synth: frame count must be positive");
  if (amplitude < 0 || lateral_amplitude < 0) throw Error("synth: amplitude must be non-negative");
  if (!(depth > 0) || !(depth_scale > 0)) throw Error("synth: depth and depth_scale must be positive");
  if (!(bulge_width > 0) || !(period_frames > 0)) throw Error("synth: bulge width and period must be positive");
  if (!(texture_period > 0)) throw Error("synth: texture period must be positive");
  if (class_confidence < 0.5 || class_confidence > 1.0) throw Error("synth: class_confidence must be in [0.5, 1]");
  if (marker_snap < 1) throw Error("synth: marker_snap must be >= 1");
  if (depth / depth_scale > 60000.0) throw Error("synth: depth exceeds 16-bit range at this depth_scale");
  CameraIntrinsics K{fx, fy, cx, cy, width, height};
  K.validate();
}

namespace {

constexpr int kClasses = 2;

double smoothstep(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * (3.0 - 2.0 * s);
}

// Bulge envelope at material (x, y), frame t.
double envelope(const SynthConfig& c, double x, double y, int t) {
  const double phase = std::sin(std::numbers::pi * t / c.period_frames);
  const double dx = x - c.bulge_x, dy = y - c.bulge_y;
  double e = phase * phase * std::exp(-(dx * dx + dy * dy) / (2.0 * c.bulge_width * c.bulge_width));
  if (c.confine_to_class) {
    e *= c.confine_ramp > 0 ? smoothstep((x - c.boundary_x) / c.confine_ramp)
                            : (x >= c.boundary_x ? 1.0 : 0.0);
  }
  return e;
}

// Material point seen along the ray through normalized image coordinates.
Vec2 intersect(const SynthConfig& c, double xn, double yn, int t) {
  const Vec3 shift = c.translation_per_frame * t;
  double z = c.depth + shift.z();
  double x = xn * z - shift.x(), y = yn * z - shift.y();
  for (int it = 0; it < 100; ++it) {
    const double e = envelope(c, x, y, t);
    const double nz = c.depth + shift.z() - c.amplitude * e;
    const double nx = xn * nz - shift.x() + c.lateral_amplitude * e;
    const double ny = yn * nz - shift.y();
    const double change = std::abs(nx - x) + std::abs(ny - y) + std::abs(nz - z);
    x = nx;
    y = ny;
    z = nz;
    if (change < 1e-13) break;
  }
  return Vec2(x, y);
}

Vec3 class_color(int label) {
  return label == 0 ? Vec3(0.55, 0.16, 0.13) : Vec3(0.86, 0.62, 0.52);
}

const Vec3 kMarkerColor(0.12, 0.78, 0.22);

}  // namespace

Vec3 synthetic_surface_point(const SynthConfig& c, double x, double y, int t) {
  const double e = envelope(c, x, y, t);
  const Vec3 shift = c.translation_per_frame * t;
  // Lateral slide points toward negative x, across the class split.
  return Vec3(x - c.lateral_amplitude * e, y, c.depth - c.amplitude * e) + shift;
}

SyntheticSequence generate_synthetic(const SynthConfig& c, std::uint64_t seed) {
  c.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticSequence seq;
  SequenceMeta& meta = seq.meta;
  meta.width = c.width;
  meta.height = c.height;
  meta.num_classes = kClasses;
  meta.depth_scale = c.depth_scale;
  meta.intrinsics = CameraIntrinsics{c.fx, c.fy, c.cx, c.cy, c.width, c.height};
  meta.class_names = {"class_0", "class_1"};
  meta.num_frames = c.frames;
  const CameraIntrinsics& K = meta.intrinsics;

  // Markers on a jittered grid plus a column on each side of the class split,
  // snapped to whole pixels at frame 0.
  std::vector<Vec2> pixels;
  const double margin = 40.0;
  const double jitter_u = (uniform(rng) - 0.5) * 16.0, jitter_v = (uniform(rng) - 0.5) * 16.0;
  for (int r = 0; r < c.marker_rows; ++r) {
    for (int k = 0; k < c.marker_cols; ++k) {
      const double fu = c.marker_cols > 1 ? k / double(c.marker_cols - 1) : 0.5;
      const double fv = c.marker_rows > 1 ? r / double(c.marker_rows - 1) : 0.5;
      pixels.emplace_back(margin + fu * (c.width - 2 * margin) + jitter_u,
                          margin + fv * (c.height - 2 * margin) + jitter_v);
    }
  }
  const double u_split = c.fx * c.boundary_x / c.depth + c.cx;
  for (int r = 0; r < c.marker_rows; ++r) {
    const double fv = (r + 0.5) / c.marker_rows;
    const double v = margin + fv * (c.height - 2 * margin);
    pixels.emplace_back(u_split - 10.0, v);
    pixels.emplace_back(u_split + 10.0, v);
  }
  const double snap = c.marker_snap;
  const double marker_r = c.marker_radius_px * c.depth / c.fx;
  for (Vec2& p : pixels) {
    p = Vec2(std::round(p.x() / snap) * snap, std::round(p.y() / snap) * snap);
    if (!(p.x() >= margin / 2 && p.y() >= margin / 2 && p.x() <= c.width - margin / 2 &&
          p.y() <= c.height - margin / 2)) {
      continue;
    }
    const Vec2 m = intersect(c, (p.x() - c.cx) / c.fx, (p.y() - c.cy) / c.fy, 0);
    bool clash = false;
    for (const Vec2& other : seq.marker_material) clash = clash || (other - m).norm() < 4 * marker_r;
    if (!clash) seq.marker_material.push_back(m);
  }

  const std::size_t M = seq.marker_material.size();
  seq.trajectories.resize(M);
  seq.points.assign(M, std::vector<Vec3>(c.frames));
  for (std::size_t i = 0; i < M; ++i) {
    seq.trajectories[i].id = static_cast<int>(i);
    seq.trajectories[i].positions.assign(c.frames, std::nullopt);
  }

  // Texture is a few plane waves with random orientation, phase and
  // wavelength, so no small material shift maps it onto itself.
  struct Wave {
    Vec2 k;
    double phase;
  };
  std::vector<Wave> waves(6);
  for (Wave& w : waves) {
    const double angle = std::numbers::pi * uniform(rng);
    const double wavelength = c.texture_period * std::exp(std::log(2.5) * uniform(rng));
    w.k = 2 * std::numbers::pi / wavelength * Vec2(std::cos(angle), std::sin(angle));
    w.phase = 2 * std::numbers::pi * uniform(rng);
  }
  const double wave_norm = 1.0 / std::sqrt(waves.size() / 2.0);

  const double band_m = c.label_noise_band_px * c.depth / c.fx;
  for (int t = 0; t < c.frames; ++t) {
    Frame f;
    f.index = t;
    f.intrinsics = K;
    f.rgb = Image<float>(c.width, c.height, 3);
    f.depth = Image<float>(c.width, c.height, 1);
    f.sem_probs = Image<float>(c.width, c.height, kClasses);
    for (int v = 0; v < c.height; ++v) {
      for (int u = 0; u < c.width; ++u) {
        const Vec2 m = intersect(c, (u - c.cx) / c.fx, (v - c.cy) / c.fy, t);
        const Vec3 P = synthetic_surface_point(c, m.x(), m.y(), t);
        double z = P.z();
        if (c.depth_noise_m > 0) z += c.depth_noise_m * normal(rng);
        f.depth.at(u, v) = static_cast<float>(z);

        int label = m.x() < c.boundary_x ? 0 : 1;
        Vec3 color = class_color(label);
        double tex = 0.0;
        for (const Wave& w : waves) tex += std::sin(w.k.dot(m) + w.phase);
        color *= 1.0 + c.texture_amplitude * std::clamp(tex * wave_norm, -1.0, 1.0);
        for (const Vec2& mk : seq.marker_material) {
          if ((mk - m).squaredNorm() <= marker_r * marker_r) {
            color = kMarkerColor;
            break;
          }
        }
        for (int ch = 0; ch < 3; ++ch) {
          const double byte = std::round(std::clamp(color[ch], 0.0, 1.0) * 255.0);
          f.rgb.at(u, v, ch) = static_cast<float>(byte / 255.0);
        }

        if (c.label_flip_prob > 0 && std::abs(m.x() - c.boundary_x) <= band_m &&
            uniform(rng) < c.label_flip_prob) {
          label = 1 - label;
        }
        for (int k = 0; k < kClasses; ++k) {
          f.sem_probs.at(u, v, k) = static_cast<float>(
              k == label ? c.class_confidence : (1.0 - c.class_confidence) / (kClasses - 1));
        }
      }
    }
    normalize_probabilities(f.sem_probs);
    seq.frames.push_back(std::move(f));

    for (std::size_t i = 0; i < M; ++i) {
      const Vec3 P = synthetic_surface_point(c, seq.marker_material[i].x(),
                                             seq.marker_material[i].y(), t);
      seq.points[i][t] = P;
      const Vec2 uv = project(P, K);
      if (uv.x() >= 0 && uv.y() >= 0 && uv.x() <= c.width - 1 && uv.y() <= c.height - 1) {
        seq.trajectories[i].positions[t] = uv;
      }
    }
  }
  return seq;
}

void write_sequence(const std::filesystem::path& dir, const SyntheticSequence& seq) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "gt", ec);
  if (ec) throw Error("cannot create " + (dir / "gt").string() + ": " + ec.message());
  write_meta(dir, seq.meta);
  for (const Frame& f : seq.frames) write_frame(dir, f, seq.meta);
  write_trajectories_csv(dir / "gt" / "trajectories.csv", seq.trajectories);
  std::ofstream out(dir / "gt" / "points3d.csv");
  if (!out) throw Error("cannot write " + (dir / "gt" / "points3d.csv").string());
  out << "frame,id,x,y,z\n";
  char buf[160];
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    for (std::size_t i = 0; i < seq.points.size(); ++i) {
      const Vec3& p = seq.points[i][t];
      std::snprintf(buf, sizeof(buf), "%zu,%zu,%.9f,%.9f,%.9f\n", t, i, p.x(), p.y(), p.z());
      out << buf;
    }
  }
  if (!out) throw Error("write failed: " + (dir / "gt" / "points3d.csv").string());
}

}  // namespace semsuper
