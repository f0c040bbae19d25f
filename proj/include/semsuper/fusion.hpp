#pragma once

#include <cstdint>
#include <vector>

#include "semsuper/association.hpp"
#include "semsuper/frame.hpp"
#include "semsuper/observation.hpp"

namespace semsuper {

struct FusionConfig {
  int surfel_stride = 1;         // sample every n-th pixel in u and v
  double r_min = 1e-4;           // meters
  double r_max = 0.02;
  double target_edge_m = 0.005;  // ED graph edge length
  int knn = 4;                   // ED nodes per surfel
  bool label_restricted_skinning = false;
  double merge_px = 1.0;         // in units of surfel_stride pixels
  double merge_depth_m = 0.01;
  double merge_angle_deg = 30.0;
  int stale_frames = 10;
  double conf_stable = 10.0;
  double node_add_radius = -1.0;  // <= 0: target_edge_m
  int node_link_count = 8;

  void validate() const;
  double node_radius() const { return node_add_radius > 0 ? node_add_radius : target_edge_m; }
};

// The tracked scene. skinning[i] belongs to surfels[i].
struct Model {
  std::vector<Surfel> surfels;
  std::vector<SkinningEntry> skinning;
  EDGraph graph;
  std::uint64_t next_id = 0;

  SceneView view() const { return SceneView{surfels, skinning, graph}; }
};

// One surfel per valid pixel on the stride grid. Throws Error when no pixel
// is valid. Ids start at `first_id`.
std::vector<Surfel> init_surfels(const Frame& frame, const ObservationMaps& maps,
                                 const FusionConfig& config, std::uint64_t first_id = 0);

// Nodes on a regular pixel grid whose stride makes the mean 3D edge length
// close to `target_edge_m`. When `labels` is given each node takes the
// majority label of its grid cell. Throws Error with fewer than 4 nodes.
EDGraph init_ed_graph(const ObservationMaps& maps, double target_edge_m,
                      const Grid<std::int32_t>* labels = nullptr);

// Pixel stride init_ed_graph would use.
int ed_grid_stride(const ObservationMaps& maps, double target_edge_m);

SkinningEntry skin_surfel(const Surfel& s, const EDGraph& graph, const FusionConfig& config);

// Surfels, graph and skinning from the first frame.
Model init_model(const Frame& frame, const ObservationMaps& maps, const FusionConfig& config);

// Applies `params` permanently: surfels move by the deformation, node rest
// positions advance to their transformed positions and rest areas are
// recomputed. Parameters are implicitly reset to identity.
void commit(const DeformationParams& params, Model& model);

struct FuseStats {
  std::size_t fused = 0;
  std::size_t added = 0;
  std::size_t deleted = 0;
  std::vector<std::size_t> new_surfels;  // indices into model.surfels after the call
};

// Merges agreeing observations into existing surfels, creates surfels for
// unexplained stride-grid pixels and deletes stale unstable surfels. New
// surfels get no skinning yet (see extend_graph).
FuseStats fuse_frame(Model& model, const Frame& frame, const ObservationMaps& maps,
                     const FusionConfig& config);

// Spawns a node at every new surfel farther than node_radius() from all
// nodes, links it to its nearest nodes, and (re)computes skinning for new
// surfels and for surfels whose neighborhood gained a node. Returns the
// number of nodes added.
std::size_t extend_graph(Model& model, const std::vector<std::size_t>& new_surfels,
                         const FusionConfig& config);

}  // namespace semsuper
