#pragma once

#include <cstdint>

#include "semsuper/frame.hpp"
#include "semsuper/image.hpp"
#include "semsuper/types.hpp"

namespace semsuper {

struct PointMap {
  Grid<Vec3> points;
  Grid<std::uint8_t> valid;
};

struct ObservationMaps {
  Grid<Vec3> points;
  Grid<Vec3> normals;
  Grid<std::uint8_t> valid;  // finite point and unit normal

  int width() const { return points.width; }
  int height() const { return points.height; }
};

PointMap backproject(const Image<float>& depth, const CameraIntrinsics& K);

// Per pixel, the normalized mean of the cross products of consecutive
// neighbor-difference vectors around the 8-neighborhood, oriented toward the
// camera. Pixels on the image border or with any invalid neighbor are invalid.
ObservationMaps estimate_normals(const PointMap& points);

ObservationMaps observe(const Frame& frame);

}  // namespace semsuper
