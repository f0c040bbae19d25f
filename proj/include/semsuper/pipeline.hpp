#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "semsuper/config.hpp"
#include "semsuper/evaluation.hpp"
#include "semsuper/fusion.hpp"

namespace semsuper {

struct FrameLog {
  int index = 0;
  std::string status;  // "init", "ok", "skipped"
  int iterations = 0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  ObjectiveTerms final_terms;
  std::size_t surfels = 0;
  std::size_t nodes = 0;
  std::size_t fused = 0, added = 0, deleted = 0, nodes_added = 0;
  DeformationParams params;  // motion applied at this frame
  double seconds = 0.0;
};

struct TrackResult {
  Model model;
  std::vector<FrameLog> frames;
  std::vector<std::optional<ModelSnapshot>> snapshots;  // one per frame
  std::vector<Grid<std::int32_t>> labels;               // observed label map per frame
};

// Runs the tracking loop over `count` frames supplied by `load`. `on_frame`
// is called after each frame is integrated.
TrackResult track_frames(int count, const std::function<Frame(int)>& load, const RunConfig& config,
                         const std::function<void(const FrameLog&, const Model&)>& on_frame = {});

// Full `track` command: reads config.sequence and writes snapshots/,
// params.log, manifest.json, metrics.json (and render/ when enabled) under
// config.out. Returns the metrics JSON text.
std::string run_track(const RunConfig& config);

// `synth` command: writes the configured sequence to config.out.
void run_synth(const RunConfig& config);

// `eval` command: reprojection report from a run directory's PLY snapshots.
// Boundary statistics use the label maps of the sequence named in the run
// manifest when it is still present.
std::string run_eval(const std::filesystem::path& run_dir, const std::filesystem::path& gt_csv);

}  // namespace semsuper
