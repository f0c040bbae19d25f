#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "semsuper/image.hpp"
#include "semsuper/types.hpp"

namespace semsuper {

struct MarkerDetectorConfig {
  double hue_min_deg = 90.0;
  double hue_max_deg = 150.0;
  double sat_min = 0.4;
  double val_min = 0.25;
  int area_min = 5;
  int area_max = 5000;
  double circularity_min = 0.6;
};

// Centroids of green, roughly circular blobs (8-connected components of the
// HSV threshold mask). Circularity is 4 pi A / P^2 with P the crack length
// scaled by pi / 4.
std::vector<Vec2> detect_markers(const Image<float>& rgb, const MarkerDetectorConfig& config = {});

struct Trajectory {
  int id = 0;
  std::vector<std::optional<Vec2>> positions;  // one slot per frame

  std::optional<int> first_frame() const;
};

// Greedy nearest-neighbour linking: each frame, the globally closest
// (track, detection) pairs within max_jump_px are linked first. A track
// links from its last known position, so short gaps are bridged.
std::vector<Trajectory> track_markers(const std::vector<std::vector<Vec2>>& detections,
                                      double max_jump_px);

// CSV with header "frame,id,u,v".
void write_trajectories_csv(const std::filesystem::path& path,
                            const std::vector<Trajectory>& trajectories);
// Throws Error("no ground truth") for a file without data rows.
std::vector<Trajectory> read_trajectories_csv(const std::filesystem::path& path);

// Surfel identities and positions (camera frame) at one frame.
struct SurfelPose {
  std::uint64_t id = 0;
  Vec3 position = Vec3::Zero();
};
using ModelSnapshot = std::vector<SurfelPose>;

ModelSnapshot snapshot_of(const std::vector<Surfel>& surfels);

struct ReprojectionConfig {
  double anchor_radius_px = 3.0;
  double boundary_band_px = 20.0;
};

struct ErrorStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

struct ReprojectionReport {
  ErrorStats overall;
  ErrorStats boundary;
  std::vector<std::optional<double>> per_frame_mean;
  std::size_t points_anchored = 0;
  std::vector<int> excluded_ids;  // no surfel within the anchor radius
  std::vector<std::pair<int, std::uint64_t>> anchors;  // trajectory id -> surfel id
};

// Anchors every trajectory at its first frame with a snapshot to the nearest
// projected surfel, then measures |project(surfel) - gt| wherever both exist.
// `labels[f]`, when present, defines the semantic boundary band at frame f.
ReprojectionReport reprojection_error(const std::vector<std::optional<ModelSnapshot>>& snapshots,
                                      const std::vector<Trajectory>& trajectories,
                                      const CameraIntrinsics& K,
                                      const std::vector<Grid<std::int32_t>>& labels,
                                      const ReprojectionConfig& config = {});

std::string report_json(const ReprojectionReport& report);

}  // namespace semsuper
