#include <doctest.h>

#include <cmath>
#include <random>

#include "../support/scenes.hpp"
#include "../support/tempdir.hpp"
#include "semsuper/losses.hpp"
#include "semsuper/ply.hpp"

using namespace semsuper;
using namespace semsuper::testing;

namespace {

FusionConfig stride(int s) {
  FusionConfig c;
  c.surfel_stride = s;
  return c;
}

Model plane_model(const Frame& f, const ObservationMaps& maps, int s = 4) {
  FusionConfig c = stride(s);
  c.target_edge_m = 0.004;
  return init_model(f, maps, c);
}

void check_simplex(const std::vector<double>& s) {
  double sum = 0;
  for (double x : s) {
    CHECK(x >= 0.0);
    sum += x;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

}  // namespace

TEST_SUITE("fusion") {

TEST_CASE("surfels from a frontal plane") {
  const CameraIntrinsics K{500, 500, 15.5, 11.5, 32, 24};
  Frame f = plane_frame(K, Vec3(0, 0, -1), 1.0, 100);
  f.depth.at(10, 10) = 0.0f;
  f.sem_probs = Image<float>(32, 24, 3);
  for (int v = 0; v < 24; ++v) {
    for (int u = 0; u < 32; ++u) {
      f.sem_probs.at(u, v, 0) = 0.7f;
      f.sem_probs.at(u, v, 1) = 0.2f;
      f.sem_probs.at(u, v, 2) = 0.1f;
    }
  }
  const ObservationMaps maps = observe(f);
  const std::vector<Surfel> s = init_surfels(f, maps, stride(1), 7);
  CHECK(s.front().id == 7);
  std::size_t valid = 0;
  for (int v = 0; v < 24; ++v) {
    for (int u = 0; u < 32; ++u) valid += maps.valid(u, v);
  }
  CHECK(s.size() == valid);
  for (const Surfel& x : s) {
    CHECK(x.radius == doctest::Approx(std::sqrt(2.0) / 500 * x.position.z()).epsilon(1e-9));
    CHECK(x.label == 0);
    CHECK(x.confidence == 1.0);
    const Vec2 uv = project(x.position, K);
    CHECK_FALSE((std::lround(uv.x()) >= 9 && std::lround(uv.x()) <= 11 && std::lround(uv.y()) >= 9 &&
                 std::lround(uv.y()) <= 11));
  }
  CHECK(s[0].radius == doctest::Approx(std::sqrt(2.0) / 500).epsilon(1e-3));

  FusionConfig clipped = stride(1);
  clipped.r_max = 0.002;
  for (const Surfel& x : init_surfels(f, maps, clipped)) CHECK(x.radius == 0.002);
  CHECK_THROWS_AS(init_surfels(f, ObservationMaps{maps.points, maps.normals, Grid<std::uint8_t>(32, 24, 0)},
                               stride(1)),
                  Error);
}

TEST_CASE("deformation graph on a frontal plane") {
  const CameraIntrinsics K{500, 500, 79.5, 59.5, 160, 120};
  const Frame f = plane_frame(K, Vec3(0, 0, -1), 1.0, 80);
  const ObservationMaps maps = observe(f);
  // Pixels are 2 mm apart, so a 5 mm edge needs a 2.5 pixel stride.
  const int s = ed_grid_stride(maps, 0.005);
  CHECK((s == 2 || s == 3));
  const EDGraph g = init_ed_graph(maps, 0.005);
  std::vector<int> degree(g.size(), 0);
  for (const auto& [a, b] : g.edges) {
    CHECK(a < b);
    ++degree[a];
    ++degree[b];
  }
  CHECK(*std::max_element(degree.begin(), degree.end()) == 8);
  int interior = 0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const Vec2 uv = project(g.nodes[j].rest, K);
    if (uv.x() > s + 1 && uv.y() > s + 1 && uv.x() < K.width - 2 - s - 1 && uv.y() < K.height - 2 - s - 1) {
      CHECK(degree[j] == 8);
      ++interior;
    }
  }
  CHECK(interior > 0);
  CHECK_FALSE(g.triangles.empty());
  for (const Triangle& t : g.triangles) CHECK(t.rest_area > 0.0);
  double mean_edge = 0.0;
  int axis_edges = 0;
  for (const auto& [a, b] : g.edges) {
    const double d = (g.nodes[a].rest - g.nodes[b].rest).norm();
    if (d < 1.2 * s * 0.002) {
      mean_edge += d;
      ++axis_edges;
    }
  }
  CHECK(mean_edge / axis_edges == doctest::Approx(s * 0.002).epsilon(0.01));

  CHECK_THROWS_AS(init_ed_graph(maps, 1.0), Error);
}

TEST_CASE("fusing an identical observation") {
  const CameraIntrinsics K = small_intrinsics();
  const Frame f0 = plane_frame(K, tilted_normal(10), 0.2, 40, 0);
  const ObservationMaps maps = observe(f0);
  Model m = plane_model(f0, maps);
  const Model before = m;
  Frame f1 = f0;
  f1.index = 1;
  const FuseStats st = fuse_frame(m, f1, maps, stride(4));
  CHECK(st.fused == before.surfels.size());
  CHECK(st.added == 0);
  CHECK(st.deleted == 0);
  REQUIRE(m.surfels.size() == before.surfels.size());
  for (std::size_t i = 0; i < m.surfels.size(); ++i) {
    CHECK((m.surfels[i].position - before.surfels[i].position).norm() < 1e-12);
    CHECK((m.surfels[i].normal - before.surfels[i].normal).norm() < 1e-12);
    CHECK((m.surfels[i].color - before.surfels[i].color).norm() < 1e-6);
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(m.surfels[i].sem_scores[c] == doctest::Approx(before.surfels[i].sem_scores[c]).epsilon(1e-12));
    }
    CHECK(m.surfels[i].confidence == before.surfels[i].confidence + 1.0);
    CHECK(m.surfels[i].timestamp == 1);
  }
}

TEST_CASE("fused position is the confidence-weighted average") {
  const CameraIntrinsics K = small_intrinsics();
  const Frame f0 = plane_frame(K, Vec3(0, 0, -1), 0.2, 40, 0);
  const ObservationMaps maps = observe(f0);
  Model m = plane_model(f0, maps);
  // Push every surfel 1 mm farther along its viewing ray.
  std::vector<Vec3> observed;
  for (Surfel& s : m.surfels) {
    observed.push_back(s.position);
    s.position *= (s.position.z() + 0.001) / s.position.z();
  }
  std::vector<Vec3> shifted;
  for (const Surfel& s : m.surfels) shifted.push_back(s.position);
  Frame f1 = f0;
  f1.index = 1;
  fuse_frame(m, f1, maps, stride(4));
  for (std::size_t i = 0; i < observed.size(); ++i) {
    CHECK((m.surfels[i].position - 0.5 * (observed[i] + shifted[i])).norm() < 1e-9);
  }
}

TEST_CASE("scores stay on the simplex through many fusions") {
  const CameraIntrinsics K = small_intrinsics(40, 30, 50);
  Frame f = plane_frame(K, Vec3(0, 0, -1), 0.2, 20);
  const ObservationMaps maps = observe(f);
  FusionConfig c = stride(2);
  c.target_edge_m = 0.01;
  c.stale_frames = 1000;
  Model m = init_model(f, maps, c);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<float> u(0, 1);
  std::vector<double> conf_before;
  for (const Surfel& s : m.surfels) conf_before.push_back(s.confidence);
  for (int t = 1; t <= 100; ++t) {
    f.index = t;
    f.sem_probs = Image<float>(K.width, K.height, 3);
    for (auto& p : f.sem_probs.data) p = u(rng);
    normalize_probabilities(f.sem_probs);
    fuse_frame(m, f, maps, c);
  }
  for (std::size_t i = 0; i < conf_before.size(); ++i) {
    check_simplex(m.surfels[i].sem_scores);
    CHECK(m.surfels[i].confidence == conf_before[i] + 100);
  }
}

TEST_CASE("stale unstable surfels are deleted") {
  const CameraIntrinsics K = small_intrinsics();
  const Frame f0 = plane_frame(K, Vec3(0, 0, -1), 0.2, 40, 0);
  const ObservationMaps maps = observe(f0);
  Model m = plane_model(f0, maps);
  Surfel ghost = m.surfels[0];
  ghost.position = Vec3(1.0, 0, 0.2);
  ghost.id = m.next_id++;
  m.surfels.push_back(ghost);
  m.skinning.push_back(m.skinning[0]);
  Surfel stable = ghost;
  stable.id = m.next_id++;
  stable.confidence = 20;
  m.surfels.push_back(stable);
  m.skinning.push_back(m.skinning[0]);

  FusionConfig c = stride(4);
  Frame f = f0;
  f.index = 9;
  CHECK(fuse_frame(m, f, maps, c).deleted == 0);
  f.index = 10;
  const FuseStats st = fuse_frame(m, f, maps, c);
  CHECK(st.deleted == 1);
  bool ghost_left = false, stable_left = false;
  for (const Surfel& s : m.surfels) {
    ghost_left = ghost_left || s.id == ghost.id;
    stable_left = stable_left || s.id == stable.id;
  }
  CHECK_FALSE(ghost_left);
  CHECK(stable_left);
  CHECK(m.skinning.size() == m.surfels.size());
}

TEST_CASE("unexplained pixels become new surfels") {
  const CameraIntrinsics K = small_intrinsics();
  const Frame f0 = plane_frame(K, Vec3(0, 0, -1), 0.2, 40, 0);
  const ObservationMaps maps = observe(f0);
  Model m = plane_model(f0, maps);
  const std::size_t n0 = m.surfels.size();
  m.surfels.resize(n0 / 2);
  m.skinning.resize(n0 / 2);
  Frame f1 = f0;
  f1.index = 1;
  const FuseStats st = fuse_frame(m, f1, maps, stride(4));
  CHECK(st.added > 0);
  CHECK(st.new_surfels.size() == st.added);
  CHECK(m.surfels.size() == n0 / 2 + st.added);
  for (std::size_t idx : st.new_surfels) {
    CHECK(m.skinning[idx].empty());
    CHECK(m.surfels[idx].timestamp == 1);
  }
  CHECK(m.next_id == n0 + st.added);
}

TEST_CASE("graph extension") {
  const CameraIntrinsics K = small_intrinsics();
  const Frame f0 = plane_frame(K, Vec3(0, 0, -1), 0.2, 40, 0);
  const ObservationMaps maps = observe(f0);
  Model m = plane_model(f0, maps);
  FusionConfig c = stride(4);
  c.target_edge_m = 0.004;

  const EDGraph g0 = m.graph;
  CHECK(extend_graph(m, {}, c) == 0);
  CHECK(m.graph.size() == g0.size());
  CHECK(m.graph.edges == g0.edges);

  Vec3 far = Vec3::Zero();
  for (const EDNode& n : m.graph.nodes) far = far.x() > n.rest.x() ? far : n.rest;
  Surfel s = m.surfels[0];
  s.position = far + Vec3(2 * c.node_radius(), 0, 0);
  m.surfels.push_back(s);
  m.skinning.emplace_back();
  CHECK(extend_graph(m, {m.surfels.size() - 1}, c) == 1);
  CHECK(m.graph.size() == g0.size() + 1);
  CHECK((m.graph.nodes.back().rest - s.position).norm() == 0.0);
  int links = 0;
  for (const auto& [a, b] : m.graph.edges) links += (b == static_cast<int>(g0.size()));
  CHECK(links == c.node_link_count);
  for (const SkinningEntry& e : m.skinning) {
    REQUIRE_FALSE(e.empty());
    double sum = 0;
    for (double w : e.weights) sum += w;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("commit") {
  const CameraIntrinsics K = small_intrinsics();
  const Frame f0 = plane_frame(K, tilted_normal(15), 0.2, 40, 0);
  const ObservationMaps maps = observe(f0);
  Model m = plane_model(f0, maps);
  const Model before = m;
  commit(DeformationParams::identity(m.graph.size()), m);
  for (std::size_t i = 0; i < m.surfels.size(); ++i) {
    CHECK((m.surfels[i].position - before.surfels[i].position).norm() < 1e-15);
  }

  DeformationParams shift = DeformationParams::identity(m.graph.size());
  shift.global_translation = Vec3(0.001, -0.002, 0.003);
  commit(shift, m);
  for (std::size_t i = 0; i < m.surfels.size(); ++i) {
    CHECK((m.surfels[i].position - (before.surfels[i].position + shift.global_translation)).norm() < 1e-12);
  }
  for (std::size_t j = 0; j < m.graph.size(); ++j) {
    CHECK((m.graph.nodes[j].rest - (before.graph.nodes[j].rest + shift.global_translation)).norm() < 1e-12);
  }

  std::mt19937_64 rng(1);
  commit(random_params(m.graph.size(), rng), m);
  CHECK(face_loss(m.graph, DeformationParams::identity(m.graph.size())) == 0.0);
  CHECK_THROWS_AS(commit(DeformationParams::identity(1), m), Error);
}

TEST_CASE("ply snapshots round trip") {
  TempDir dir("ply");
  const CameraIntrinsics K = small_intrinsics();
  const Frame f0 = plane_frame(K, tilted_normal(5), 0.2, 40, 0);
  const Model m = plane_model(f0, observe(f0));
  write_surfel_ply(dir / "s.ply", m.surfels);
  const std::vector<Surfel> back = read_surfel_ply(dir / "s.ply");
  REQUIRE(back.size() == m.surfels.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].id == m.surfels[i].id);
    CHECK(back[i].label == m.surfels[i].label);
    CHECK((back[i].position - m.surfels[i].position).norm() < 1e-6);
    CHECK(back[i].timestamp == m.surfels[i].timestamp);
  }
  CHECK_THROWS_AS(read_surfel_ply(dir / "none.ply"), Error);
}

}
