#pragma once

#include <filesystem>
#include <vector>

#include "semsuper/types.hpp"

namespace semsuper {

// Fixed palette used to color surfels by label in exported snapshots.
Vec3 label_color(int label);

// Binary little-endian PLY with position, normal, color, radius, confidence,
// timestamp, label, label color and surfel id.
void write_surfel_ply(const std::filesystem::path& path, const std::vector<Surfel>& surfels);

// Reads files written by write_surfel_ply. sem_scores are not stored and come
// back empty.
std::vector<Surfel> read_surfel_ply(const std::filesystem::path& path);

}  // namespace semsuper
