#include "semsuper/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <variant>

#include <nlohmann/json.hpp>

namespace semsuper {

using nlohmann::json;
namespace fs = std::filesystem;

RunConfig::RunConfig() { fusion.surfel_stride = 4; }

void RunConfig::validate() const {
  if (snapshot_every < 1) throw Error("snapshot_every must be >= 1");
  fusion.validate();
  weights.validate();
  optimizer.validate();
  if (render.downsample < 1) throw Error("render downsample must be >= 1");
  if (!(render.spread > 0) || !(render.z_soft > 0)) throw Error("render spread and z_soft must be positive");
  if (render.window < 1 || render.window % 2 == 0) throw Error("render window must be a positive odd integer");
  if (association.dist_thresh <= 0) throw Error("association dist_thresh must be positive");
}

void apply_preset(RunConfig& c, const std::string& name) {
  LossWeights& w = c.weights;
  if (name == "semantic-super") {
    w.enable_icp = w.enable_render = w.enable_morph = true;
    w.soft_label_mode = w.use_semantics = true;
    c.fusion.label_restricted_skinning = false;
  } else if (name == "nosoftlabel") {
    w.enable_icp = w.enable_render = w.enable_morph = true;
    w.soft_label_mode = false;
    w.use_semantics = true;
    c.fusion.label_restricted_skinning = true;
  } else if (name == "super") {
    w.enable_icp = true;
    w.enable_render = w.enable_morph = false;
    w.use_semantics = false;
    c.fusion.label_restricted_skinning = false;
  } else if (name == "no-morph") {
    w.enable_morph = false;
    return;
  } else if (name == "no-render") {
    w.enable_render = false;
    return;
  } else {
    throw Error("unknown preset or ablation: " + name);
  }
  c.preset = name;
}

namespace {

using FieldRef = std::variant<double*, int*, bool*, std::string*, Vec3*, fs::path*, std::uint64_t*>;

struct Field {
  const char* section;  // "" for top level
  const char* key;
  FieldRef ref;
};

std::vector<Field> fields(RunConfig& c) {
  FusionConfig& f = c.fusion;
  AssociationConfig& a = c.association;
  LossWeights& w = c.weights;
  OptimizerConfig& o = c.optimizer;
  RenderConfig& r = c.render;
  SynthConfig& s = c.synth;
  MarkerDetectorConfig& m = c.markers;
  return {
      {"", "sequence", &c.sequence},
      {"", "out", &c.out},
      {"", "seed", &c.seed},
      {"", "deterministic", &c.deterministic},
      {"", "snapshot_every", &c.snapshot_every},
      {"", "warm_start", &c.warm_start},
      {"", "preset", &c.preset},
      {"fusion", "surfel_stride", &f.surfel_stride},
      {"fusion", "r_min", &f.r_min},
      {"fusion", "r_max", &f.r_max},
      {"fusion", "target_edge_m", &f.target_edge_m},
      {"fusion", "knn", &f.knn},
      {"fusion", "label_restricted_skinning", &f.label_restricted_skinning},
      {"fusion", "merge_px", &f.merge_px},
      {"fusion", "merge_depth_m", &f.merge_depth_m},
      {"fusion", "merge_angle_deg", &f.merge_angle_deg},
      {"fusion", "stale_frames", &f.stale_frames},
      {"fusion", "conf_stable", &f.conf_stable},
      {"fusion", "node_add_radius", &f.node_add_radius},
      {"fusion", "node_link_count", &f.node_link_count},
      {"association", "dist_thresh", &a.dist_thresh},
      {"association", "angle_thresh_deg", &a.angle_thresh_deg},
      {"weights", "lambda_s", &w.lambda_s},
      {"weights", "lambda_m", &w.lambda_m},
      {"weights", "lambda_r", &w.lambda_r},
      {"weights", "enable_icp", &w.enable_icp},
      {"weights", "enable_render", &w.enable_render},
      {"weights", "enable_morph", &w.enable_morph},
      {"weights", "soft_label_mode", &w.soft_label_mode},
      {"weights", "use_semantics", &w.use_semantics},
      {"weights", "length_unit_m", &w.length_unit_m},
      {"optimizer", "method", &o.method},
      {"optimizer", "step_translation", &o.step_translation},
      {"optimizer", "step_rotation", &o.step_rotation},
      {"optimizer", "max_iters", &o.max_iters},
      {"optimizer", "reassoc_every", &o.reassoc_every},
      {"optimizer", "tol", &o.tol},
      {"optimizer", "tol_window", &o.tol_window},
      {"optimizer", "beta1", &o.beta1},
      {"optimizer", "beta2", &o.beta2},
      {"optimizer", "epsilon", &o.epsilon},
      {"optimizer", "rigid_iters", &o.rigid_iters},
      {"render", "spread", &r.spread},
      {"render", "z_soft", &r.z_soft},
      {"render", "window", &r.window},
      {"render", "background", &r.background},
      {"render", "background_weight", &r.background_weight},
      {"render", "downsample", &r.downsample},
      {"render", "dump_png", &r.dump_png},
      {"evaluation", "anchor_radius_px", &c.evaluation.anchor_radius_px},
      {"evaluation", "boundary_band_px", &c.evaluation.boundary_band_px},
      {"markers", "hue_min_deg", &m.hue_min_deg},
      {"markers", "hue_max_deg", &m.hue_max_deg},
      {"markers", "sat_min", &m.sat_min},
      {"markers", "val_min", &m.val_min},
      {"markers", "area_min", &m.area_min},
      {"markers", "area_max", &m.area_max},
      {"markers", "circularity_min", &m.circularity_min},
      {"synth", "width", &s.width},
      {"synth", "height", &s.height},
      {"synth", "fx", &s.fx},
      {"synth", "fy", &s.fy},
      {"synth", "cx", &s.cx},
      {"synth", "cy", &s.cy},
      {"synth", "frames", &s.frames},
      {"synth", "depth", &s.depth},
      {"synth", "depth_scale", &s.depth_scale},
      {"synth", "boundary_x", &s.boundary_x},
      {"synth", "amplitude", &s.amplitude},
      {"synth", "lateral_amplitude", &s.lateral_amplitude},
      {"synth", "period_frames", &s.period_frames},
      {"synth", "bulge_x", &s.bulge_x},
      {"synth", "bulge_y", &s.bulge_y},
      {"synth", "bulge_width", &s.bulge_width},
      {"synth", "confine_to_class", &s.confine_to_class},
      {"synth", "confine_ramp", &s.confine_ramp},
      {"synth", "translation_per_frame", &s.translation_per_frame},
      {"synth", "texture_amplitude", &s.texture_amplitude},
      {"synth", "texture_period", &s.texture_period},
      {"synth", "marker_radius_px", &s.marker_radius_px},
      {"synth", "marker_cols", &s.marker_cols},
      {"synth", "marker_rows", &s.marker_rows},
      {"synth", "marker_snap", &s.marker_snap},
      {"synth", "class_confidence", &s.class_confidence},
      {"synth", "label_noise_band_px", &s.label_noise_band_px},
      {"synth", "label_flip_prob", &s.label_flip_prob},
      {"synth", "depth_noise_m", &s.depth_noise_m},
  };
}

void read_field(const json& v, const Field& f) {
  const std::string name = std::string(f.section) + (*f.section ? "." : "") + f.key;
  try {
    std::visit(
        [&](auto* p) {
          using T = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<T, Vec3>) {
            const auto arr = v.get<std::vector<double>>();
            if (arr.size() != 3) throw Error(name + " must have 3 entries");
            *p = Vec3(arr[0], arr[1], arr[2]);
          } else if constexpr (std::is_same_v<T, fs::path>) {
            *p = v.get<std::string>();
          } else {
            *p = v.get<T>();
          }
        },
        f.ref);
  } catch (const json::exception& e) {
    throw Error("config: bad value for " + name + ": " + e.what());
  }
}

json write_field(const Field& f) {
  return std::visit(
      [](auto* p) -> json {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Vec3>) {
          return json::array({p->x(), p->y(), p->z()});
        } else if constexpr (std::is_same_v<T, fs::path>) {
          return p->string();
        } else {
          return *p;
        }
      },
      f.ref);
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw Error("config: top level must be an object");
  RunConfig c;
  if (j.contains("preset")) apply_preset(c, j.at("preset").get<std::string>());
  const std::vector<Field> fs_ = fields(c);
  std::set<std::string> sections, top;
  for (const Field& f : fs_) (*f.section ? sections : top).insert(*f.section ? f.section : f.key);
  for (const auto& [key, value] : j.items()) {
    if (sections.count(key)) {
      if (!value.is_object()) throw Error("config: section " + key + " must be an object");
      for (const auto& [sub, v] : value.items()) {
        bool found = false;
        for (const Field& f : fs_) {
          if (key == f.section && sub == f.key) {
            read_field(v, f);
            found = true;
          }
        }
        if (!found) throw Error("config: unknown key " + key + "." + sub);
      }
    } else if (top.count(key)) {
      for (const Field& f : fs_) {
        if (!*f.section && key == f.key) read_field(value, f);
      }
    } else {
      throw Error("config: unknown key " + key);
    }
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("config: parse error in " + path.string() + ": " + e.what());
  }
  RunConfig c = run_config_from_json(j);
  if (!c.sequence.empty() && c.sequence.is_relative()) c.sequence = path.parent_path() / c.sequence;
  return c;
}

json run_config_to_json(const RunConfig& config) {
  RunConfig copy = config;
  json j = json::object();
  for (const Field& f : fields(copy)) {
    if (*f.section) {
      j[f.section][f.key] = write_field(f);
    } else {
      j[f.key] = write_field(f);
    }
  }
  return j;
}

std::string config_hash(const RunConfig& config) {
  const std::string s = run_config_to_json(config).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace semsuper
