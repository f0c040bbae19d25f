#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "semsuper/association.hpp"
#include "semsuper/evaluation.hpp"
#include "semsuper/fusion.hpp"
#include "semsuper/objective.hpp"
#include "semsuper/optimizer.hpp"
#include "semsuper/renderer.hpp"
#include "semsuper/synthetic.hpp"

namespace semsuper {

struct RunConfig {
  std::filesystem::path sequence;
  std::filesystem::path out = "run";
  std::uint64_t seed = 0;
  bool deterministic = true;
  int snapshot_every = 1;
  bool warm_start = true;  // start each frame from the previous frame's motion
  std::string preset = "semantic-super";

  FusionConfig fusion;
  AssociationConfig association;
  LossWeights weights;
  OptimizerConfig optimizer;
  RenderConfig render;
  ReprojectionConfig evaluation;
  MarkerDetectorConfig markers;
  SynthConfig synth;

  RunConfig();
  void validate() const;
};

// Presets: "semantic-super", "nosoftlabel", "super". Ablations on top of the
// current settings: "no-morph", "no-render", and the preset names.
void apply_preset(RunConfig& config, const std::string& name);

// Reads a JSON config. Keys not present keep their defaults; unknown keys are
// an error. A top-level "preset" is applied before the explicit sections.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& config);

// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const RunConfig& config);

}  // namespace semsuper
