#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "semsuper/evaluation.hpp"
#include "semsuper/frame.hpp"

namespace semsuper {

// A textured plane facing the camera, split into two classes at material
// x = boundary_x. A Gaussian bulge rises toward the camera on the class-1
// side and optionally slides material sideways; the whole surface can also
// translate rigidly every frame. Marker disks sit at tracked material points.
struct SynthConfig {
  int width = 640;
  int height = 480;
  double fx = 500.0, fy = 500.0, cx = 320.0, cy = 240.0;
  int frames = 30;
  double depth = 0.15;          // plane distance, meters
  double depth_scale = 1e-5;    // meters per depth PNG unit
  double boundary_x = 0.0;      // material x of the class split
  double amplitude = 0.01;      // bulge height, meters
  double lateral_amplitude = 0.0;  // sideways material slide at the bulge, meters
  double period_frames = 30.0;  // sin^2 cycle length
  double bulge_x = 0.03, bulge_y = 0.0;
  double bulge_width = 0.015;   // Gaussian sigma, meters
  bool confine_to_class = true;
  double confine_ramp = 0.01;   // smoothstep width inside class 1, meters
  Vec3 translation_per_frame = Vec3::Zero();
  double texture_amplitude = 0.25;
  double texture_period = 0.008;  // shortest texture wavelength, meters
  double marker_radius_px = 3.0;  // at frame 0
  int marker_cols = 7, marker_rows = 5;
  int marker_snap = 4;          // frame-0 marker pixels are multiples of this
  double class_confidence = 0.9;
  double label_noise_band_px = 0.0;  // flip labels within this distance of the boundary
  double label_flip_prob = 0.0;
  double depth_noise_m = 0.0;

  void validate() const;
};

struct SyntheticSequence {
  SequenceMeta meta;
  std::vector<Frame> frames;
  std::vector<Trajectory> trajectories;          // ground-truth marker pixels
  std::vector<std::vector<Vec3>> points;         // [trajectory][frame] camera-frame points
  std::vector<Vec2> marker_material;             // material (x, y) of every marker
};

// Deterministic per seed. RGB and class maps are quantized exactly as
// write_sequence stores them; depth stays exact in memory and is quantized to
// depth_scale only on write.
SyntheticSequence generate_synthetic(const SynthConfig& config, std::uint64_t seed);

// Surface point of material (x, y) at frame t.
Vec3 synthetic_surface_point(const SynthConfig& config, double x, double y, int t);

// Writes the ingestion layout plus gt/trajectories.csv and gt/points3d.csv.
void write_sequence(const std::filesystem::path& dir, const SyntheticSequence& seq);

}  // namespace semsuper
