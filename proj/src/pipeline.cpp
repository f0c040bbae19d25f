#include "semsuper/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "semsuper/ply.hpp"
#include "semsuper/png_io.hpp"
#include "semsuper/semantics.hpp"
#include "semsuper/synthetic.hpp"

namespace semsuper {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Next frame's starting point: the previous global motion, nodes at rest.
DeformationParams warm_start(const DeformationParams& p, std::size_t nodes) {
  DeformationParams out = DeformationParams::identity(nodes);
  out.global_rotation = p.global_rotation;
  out.global_translation = p.global_translation;
  return out;
}

json frame_json(const FrameLog& f) {
  return {{"index", f.index},
          {"status", f.status},
          {"iterations", f.iterations},
          {"initial_objective", f.initial_objective},
          {"final_objective", f.final_objective},
          {"final_terms",
           {{"icp", f.final_terms.icp},
            {"render", f.final_terms.render},
            {"morph", f.final_terms.morph},
            {"face", f.final_terms.face},
            {"rot", f.final_terms.rot}}},
          {"surfels", f.surfels},
          {"nodes", f.nodes},
          {"fused", f.fused},
          {"added", f.added},
          {"deleted", f.deleted},
          {"nodes_added", f.nodes_added}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

Image<float> to_float(const Image<double>& img) {
  Image<float> out(img.width, img.height, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = static_cast<float>(img.data[i]);
  return out;
}

}  // namespace

TrackResult track_frames(int count, const std::function<Frame(int)>& load, const RunConfig& cfg,
                         const std::function<void(const FrameLog&, const Model&)>& on_frame) {
  cfg.validate();
  if (count < 1) throw Error("sequence has no frames");
  TrackResult res;
  res.snapshots.resize(count);
  res.labels.resize(count);
  DeformationParams motion;

  for (int t = 0; t < count; ++t) {
    const auto start = std::chrono::steady_clock::now();
    const Frame frame = load(t);
    const ObservationMaps maps = observe(frame);
    res.labels[t] = label_map(frame.sem_probs);
    FrameLog log;
    log.index = t;

    if (t == 0) {
      res.model = init_model(frame, maps, cfg.fusion);
      log.status = "init";
      motion = DeformationParams::identity(res.model.graph.size());
      log.params = motion;
    } else {
      const SemanticBoundaryField field = build_boundary_field(frame.sem_probs);
      const std::size_t n = res.model.graph.size();
      const DeformationParams init =
          cfg.warm_start ? warm_start(motion, n) : DeformationParams::identity(n);
      const OptimizeResult opt = optimize(res.model.view(), init, frame, maps, field, cfg.weights,
                                          cfg.optimizer, cfg.association, cfg.render);
      log.status = opt.status;
      log.iterations = opt.iterations;
      log.initial_objective = opt.initial.total;
      log.final_objective = opt.final.total;
      log.final_terms = opt.final;
      log.params = opt.params;
      if (opt.status == "ok") {
        motion = opt.params;
        commit(opt.params, res.model);
        const FuseStats fs_ = fuse_frame(res.model, frame, maps, cfg.fusion);
        log.fused = fs_.fused;
        log.added = fs_.added;
        log.deleted = fs_.deleted;
        log.nodes_added = extend_graph(res.model, fs_.new_surfels, cfg.fusion);
      } else {
        std::cerr << "warning: frame " << t << " skipped (no data association)\n";
        motion = DeformationParams::identity(n);
      }
    }
    log.surfels = res.model.surfels.size();
    log.nodes = res.model.graph.size();
    res.snapshots[t] = snapshot_of(res.model.surfels);
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (on_frame) on_frame(log, res.model);
    res.frames.push_back(std::move(log));
  }
  return res;
}

std::string run_track(const RunConfig& cfg) {
  cfg.validate();
  const SequenceMeta meta = load_meta(cfg.sequence);
  const int count = count_frames(cfg.sequence, meta);
  fs::create_directories(cfg.out / "snapshots");
  if (cfg.render.dump_png) fs::create_directories(cfg.out / "render");

  const auto t0 = std::chrono::steady_clock::now();
  std::ofstream params_log(cfg.out / "params.log");
  if (!params_log) throw Error("cannot write " + (cfg.out / "params.log").string());

  json manifest = {{"config", run_config_to_json(cfg)},
                   {"config_hash", config_hash(cfg)},
                   {"sequence", fs::absolute(cfg.sequence).string()},
                   {"intrinsics",
                    {{"fx", meta.intrinsics.fx},
                     {"fy", meta.intrinsics.fy},
                     {"cx", meta.intrinsics.cx},
                     {"cy", meta.intrinsics.cy},
                     {"width", meta.intrinsics.width},
                     {"height", meta.intrinsics.height}}},
                   {"frames", json::array()},
                   {"status", "running"}};
  auto flush_manifest = [&] { write_text(cfg.out / "manifest.json", manifest.dump(2) + "\n"); };

  auto on_frame = [&](const FrameLog& log, const Model& model) {
    params_log << log.index << ' ' << log.status;
    char buf[32];
    for (double x : log.params.flatten()) {
      std::snprintf(buf, sizeof(buf), " %.17g", x);
      params_log << buf;
    }
    params_log << '\n' << std::flush;
    if (log.index % cfg.snapshot_every == 0 || log.index == count - 1) {
      write_surfel_ply(cfg.out / "snapshots" / (frame_name(log.index) + ".ply"), model.surfels);
    }
    if (cfg.render.dump_png) {
      const CameraIntrinsics K = meta.intrinsics.downsampled(cfg.render.downsample);
      const RenderedImage img = splat_render(
          model.view(), DeformationParams::identity(model.graph.size()), K, cfg.render);
      write_png_rgb(cfg.out / "render" / (frame_name(log.index) + ".png"), to_float(img.color));
    }
    json fj = frame_json(log);
    fj["seconds"] = log.seconds;
    manifest["frames"].push_back(fj);
    flush_manifest();
  };

  TrackResult res;
  try {
    res = track_frames(
        count, [&](int i) { return load_frame(cfg.sequence, i, meta); }, cfg, on_frame);
  } catch (const Error& e) {
    manifest["status"] = "aborted";
    manifest["error"] = e.what();
    flush_manifest();
    throw;
  }

  json metrics = {{"frames", json::array()}};
  for (const FrameLog& f : res.frames) metrics["frames"].push_back(frame_json(f));
  const fs::path gt = cfg.sequence / "gt" / "trajectories.csv";
  if (fs::exists(gt)) {
    const ReprojectionReport rep = reprojection_error(res.snapshots, read_trajectories_csv(gt),
                                                      meta.intrinsics, res.labels, cfg.evaluation);
    metrics["reprojection"] = json::parse(report_json(rep));
  }
  const std::string text = metrics.dump(2) + "\n";
  write_text(cfg.out / "metrics.json", text);

  manifest["status"] = "done";
  manifest["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  flush_manifest();
  return text;
}

void run_synth(const RunConfig& cfg) {
  const SyntheticSequence seq = generate_synthetic(cfg.synth, cfg.seed);
  write_sequence(cfg.out, seq);
}

std::string run_eval(const fs::path& run_dir, const fs::path& gt_csv) {
  const fs::path manifest_path = run_dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw Error("missing run manifest: " + manifest_path.string());
  if (!fs::exists(gt_csv)) throw Error("missing ground truth: " + gt_csv.string());
  std::ifstream in(manifest_path);
  const json manifest = json::parse(in);
  const json& k = manifest.at("intrinsics");
  CameraIntrinsics K{k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                     k.at("cy").get<double>(),  k.at("width").get<int>(), k.at("height").get<int>()};
  const RunConfig cfg = run_config_from_json(manifest.at("config"));
  const std::vector<Trajectory> trajectories = read_trajectories_csv(gt_csv);

  std::size_t frames = manifest.at("frames").size();
  for (const auto& t : trajectories) frames = std::max(frames, t.positions.size());
  std::vector<std::optional<ModelSnapshot>> snapshots(frames);
  bool any = false;
  for (std::size_t f = 0; f < frames; ++f) {
    const fs::path ply = run_dir / "snapshots" / (frame_name(static_cast<int>(f)) + ".ply");
    if (!fs::exists(ply)) continue;
    snapshots[f] = snapshot_of(read_surfel_ply(ply));
    any = true;
  }
  if (!any) throw Error("no snapshots in " + (run_dir / "snapshots").string());

  std::vector<Grid<std::int32_t>> labels;
  const fs::path seq = manifest.value("sequence", std::string());
  if (!seq.empty() && fs::exists(seq / "meta.json")) {
    const SequenceMeta meta = load_meta(seq);
    const int n = std::min<int>(count_frames(seq, meta), static_cast<int>(frames));
    for (int f = 0; f < n; ++f) labels.push_back(label_map(load_frame(seq, f, meta).sem_probs));
  }
  return report_json(reprojection_error(snapshots, trajectories, K, labels, cfg.evaluation));
}

}  // namespace semsuper
