#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace semsuper {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;

// All recoverable failures surface as this type; the message names the cause.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  // Throws Error when focal lengths are non-positive or the principal point
  // lies outside the image.
  void validate() const;

  // Intrinsics for an image shrunk by an integer factor, pixel centers kept.
  CameraIntrinsics downsampled(int factor) const;
};

struct Surfel {
  std::uint64_t id = 0;
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 color = Vec3::Zero();
  double radius = 0.0;
  double confidence = 0.0;
  int timestamp = 0;
  std::vector<double> sem_scores;
  int label = 0;
};

struct EDNode {
  Vec3 rest = Vec3::Zero();  // g
  int label = 0;             // majority class of the pixels that founded it
};

struct Triangle {
  std::array<int, 3> nodes{};
  double rest_area = 0.0;
};

struct EDGraph {
  std::vector<EDNode> nodes;
  std::vector<std::pair<int, int>> edges;  // i < j, each undirected edge once
  std::vector<Triangle> triangles;

  std::size_t size() const { return nodes.size(); }
  bool has_edge(int a, int b) const;
  void add_edge(int a, int b);
  // Recompute every triangle's rest area from the current node rest positions.
  void refresh_rest_areas();
};

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

// Per-frame incremental motion: a quaternion (w, x, y, z) and a translation
// per ED node plus one global rigid transform. Flat layout is
// [q_0, b_0, q_1, b_1, ..., q_{n-1}, b_{n-1}, q_g, t_g], 7 * (n + 1) values.
struct DeformationParams {
  std::vector<Vec4> node_rotation;
  std::vector<Vec3> node_translation;
  Vec4 global_rotation = Vec4(1, 0, 0, 0);
  Vec3 global_translation = Vec3::Zero();

  static DeformationParams identity(std::size_t node_count);

  std::size_t node_count() const { return node_rotation.size(); }
  std::size_t size() const { return 7 * (node_count() + 1); }

  VecX flatten() const;
  static DeformationParams unflatten(const VecX& flat);

  static std::size_t rotation_offset(std::size_t node) { return 7 * node; }
  static std::size_t translation_offset(std::size_t node) { return 7 * node + 4; }
  std::size_t global_rotation_offset() const { return 7 * node_count(); }
  std::size_t global_translation_offset() const { return 7 * node_count() + 4; }
};

// The k nearest ED nodes of a surfel and their normalized blend weights.
struct SkinningEntry {
  std::vector<int> nodes;
  std::vector<double> weights;

  bool empty() const { return nodes.empty(); }
};

int argmax(const std::vector<double>& v);

// Clamps negatives to zero and rescales to unit sum. A zero vector becomes
// uniform.
void normalize_simplex(std::vector<double>& v);

}  // namespace semsuper
