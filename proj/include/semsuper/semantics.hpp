#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semsuper/image.hpp"

namespace semsuper {

// Jensen-Shannon divergence with natural logarithm, in [0, ln 2].
double jsd(std::span<const double> a, std::span<const double> b);

// exp(-JSD); lies in [0.5, 1] for simplex inputs.
double semantic_weight(std::span<const double> a, std::span<const double> b);

// Exact Euclidean distance transform (Felzenszwalb-Huttenlocher) that also
// reports, for every pixel, the linear index v * W + u of its nearest seed.
// Pixels with no seed anywhere get distance +inf and nearest -1.
struct DistanceField {
  Grid<float> distance;
  Grid<std::int32_t> nearest;

  bool empty() const { return distance.data.empty(); }
};

DistanceField distance_transform(const Grid<std::uint8_t>& seeds);

Grid<std::int32_t> label_map(const Image<float>& sem_probs);

struct ClassBoundary {
  bool present = false;
  DistanceField field;  // seeds are the class's boundary pixels
};

struct SemanticBoundaryField {
  Grid<std::int32_t> labels;
  std::vector<ClassBoundary> classes;

  int width() const { return labels.width; }
  int height() const { return labels.height; }
};

// A class's boundary consists of its region pixels that touch a 4-neighbor
// of another label or lie on the image border. Absent classes are recorded
// with present = false.
SemanticBoundaryField build_boundary_field(const Image<float>& sem_probs);

// Distance to the nearest pixel that has a 4-neighbor of a different label.
// The image border is not an edge here.
DistanceField semantic_edge_distance(const Grid<std::int32_t>& labels);

}  // namespace semsuper
