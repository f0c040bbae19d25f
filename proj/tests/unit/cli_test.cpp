#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "../support/tempdir.hpp"
#include "semsuper/config.hpp"
#include "semsuper/pipeline.hpp"

using namespace semsuper;
using semsuper::testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return out;
}

RunConfig tiny_config(const fs::path& root) {
  RunConfig c;
  c.synth.width = 160;
  c.synth.height = 120;
  c.synth.fx = c.synth.fy = 125.0;
  c.synth.cx = 80.0;
  c.synth.cy = 60.0;
  c.synth.frames = 3;
  c.synth.amplitude = 0.0;
  c.synth.marker_cols = 5;
  c.synth.marker_rows = 3;
  c.fusion.surfel_stride = 2;
  c.optimizer.max_iters = 10;
  c.sequence = root / "seq";
  c.out = root / "run";
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SEMSUPER_CLI) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config keys") {
  nlohmann::json j = {{"optimizer", {{"max_iters", 7}}}, {"seed", 3}};
  const RunConfig c = run_config_from_json(j);
  CHECK(c.optimizer.max_iters == 7);
  CHECK(c.seed == 3);
  CHECK(c.weights.lambda_s == RunConfig{}.weights.lambda_s);

  CHECK_THROWS_WITH_AS(run_config_from_json({{"optimiser", {{"max_iters", 7}}}}),
                       doctest::Contains("optimiser"), Error);
  CHECK_THROWS_AS(run_config_from_json({{"optimizer", {{"max_iter", 7}}}}), Error);
  CHECK_THROWS_AS(run_config_from_json({{"optimizer", {{"max_iters", "many"}}}}), Error);
  CHECK_THROWS_AS(run_config_from_json({{"optimizer", {{"max_iters", -1}}}}), Error);
}

TEST_CASE("presets and ablations") {
  RunConfig c;
  CHECK(c.weights.enable_render);
  CHECK(c.weights.enable_morph);
  CHECK(c.weights.soft_label_mode);

  apply_preset(c, "no-morph");
  CHECK_FALSE(c.weights.enable_morph);
  CHECK(c.weights.enable_render);
  apply_preset(c, "no-render");
  CHECK_FALSE(c.weights.enable_render);

  RunConfig s;
  apply_preset(s, "super");
  CHECK(s.weights.enable_icp);
  CHECK_FALSE(s.weights.enable_render);
  CHECK_FALSE(s.weights.enable_morph);
  CHECK(s.preset == "super");

  RunConfig h;
  apply_preset(h, "nosoftlabel");
  CHECK_FALSE(h.weights.soft_label_mode);
  CHECK(h.fusion.label_restricted_skinning);

  const RunConfig from_json = run_config_from_json({{"preset", "super"}, {"weights", {{"enable_render", true}}}});
  CHECK(from_json.weights.enable_render);
  CHECK_FALSE(from_json.weights.enable_morph);

  CHECK_THROWS_AS(apply_preset(c, "no-icp"), Error);
}

TEST_CASE("config json round trip and hash") {
  RunConfig c;
  c.seed = 11;
  c.optimizer.step_rotation = 0.004;
  c.synth.translation_per_frame = Vec3(0.001, 0, 0);
  const RunConfig back = run_config_from_json(run_config_to_json(c));
  CHECK(run_config_to_json(back) == run_config_to_json(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c).size() == 16);
  RunConfig d = c;
  d.optimizer.max_iters += 1;
  CHECK(config_hash(d) != config_hash(c));

  TempDir dir("cfg");
  std::ofstream(dir / "c.json") << run_config_to_json(c).dump();
  CHECK(config_hash(load_run_config(dir / "c.json")) == config_hash(c));
  CHECK_THROWS_AS(load_run_config(dir / "missing.json"), Error);
  std::ofstream(dir / "bad.json") << "{ nope";
  CHECK_THROWS_AS(load_run_config(dir / "bad.json"), Error);
}

TEST_CASE("default synthetic sequence") {
  TempDir dir("synthdefault");
  RunConfig c;
  c.seed = 7;
  c.out = dir / "a";
  run_synth(c);
  const SequenceMeta m = load_meta(c.out);
  CHECK(m.width == 640);
  CHECK(m.height == 480);
  CHECK(m.num_classes == 2);
  CHECK(count_frames(c.out, m) == 30);
  CHECK(fs::exists(c.out / "gt/trajectories.csv"));
}

TEST_CASE("same seed writes identical sequences") {
  TempDir dir("synthseed");
  RunConfig c = tiny_config(dir.path());
  c.synth.amplitude = 0.01;
  c.seed = 7;
  c.out = dir / "a";
  run_synth(c);
  c.out = dir / "b";
  run_synth(c);
  CHECK(tree(dir / "a") == tree(dir / "b"));
}

TEST_CASE("tracking a static sequence") {
  TempDir dir("track");
  RunConfig c = tiny_config(dir.path());
  RunConfig s = c;
  s.out = c.sequence;
  run_synth(s);
  const auto before = tree(c.sequence);

  const std::string text = run_track(c);
  const nlohmann::json metrics = nlohmann::json::parse(text);
  CHECK(metrics.at("frames").size() == 3);
  CHECK(metrics.at("reprojection").at("overall").at("mean").get<double>() < 0.5);
  CHECK(fs::exists(c.out / "params.log"));
  CHECK(fs::exists(c.out / "snapshots/000002.ply"));
  const nlohmann::json manifest = nlohmann::json::parse(slurp(c.out / "manifest.json"));
  CHECK(manifest.at("status") == "done");
  CHECK(manifest.at("config_hash") == config_hash(c));

  // The input sequence is read only.
  CHECK(tree(c.sequence) == before);

  const nlohmann::json report =
      nlohmann::json::parse(run_eval(c.out, c.sequence / "gt/trajectories.csv"));
  CHECK(report.at("overall").at("mean").get<double>() < 0.5);
  CHECK(report.contains("boundary"));
  CHECK(report.contains("per_frame_mean"));

  CHECK_THROWS_AS(run_eval(dir / "nowhere", c.sequence / "gt/trajectories.csv"), Error);
  CHECK_THROWS_AS(run_eval(c.out, dir / "none.csv"), Error);
  std::ofstream(dir / "empty.csv") << "frame,id,u,v\n";
  CHECK_THROWS_WITH_AS(run_eval(c.out, dir / "empty.csv"), doctest::Contains("no ground truth"), Error);
}

TEST_CASE("track rejects a missing sequence") {
  TempDir dir("nosequence");
  RunConfig c = tiny_config(dir.path());
  CHECK_THROWS_AS(run_track(c), Error);
}

TEST_CASE("command line") {
  TempDir dir("cmdline");
  const RunConfig c = tiny_config(dir.path());
  nlohmann::json j = run_config_to_json(c);
  std::ofstream(dir / "cfg.json") << j.dump();
  const std::string cfg = (dir / "cfg.json").string();

  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") != 0);
  CHECK(run_cli("synth --config " + cfg + " --seed 4 --out " + c.sequence.string()) == 0);
  CHECK(fs::exists(c.sequence / "meta.json"));
  CHECK(run_cli("track --config " + cfg + " --deterministic --ablate no-render --out " +
                (dir / "r").string()) == 0);
  CHECK(fs::exists(dir / "r/metrics.json"));
  CHECK(run_cli("track --config " + cfg + " --ablate bogus") != 0);
  CHECK(run_cli("track --sequence " + (dir / "absent").string() + " --out " + (dir / "x").string()) != 0);
  CHECK(run_cli("eval --run " + (dir / "r").string() + " --gt " + (c.sequence / "gt/trajectories.csv").string() +
                " --out " + (dir / "report.json").string()) == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "report.json")).contains("overall"));
  CHECK(run_cli("eval --run " + (dir / "r").string()) != 0);
}

}
