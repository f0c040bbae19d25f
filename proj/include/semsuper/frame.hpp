#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "semsuper/image.hpp"
#include "semsuper/types.hpp"

namespace semsuper {

// Contents of {seq}/meta.json.
struct SequenceMeta {
  int width = 0;
  int height = 0;
  int num_classes = 0;
  double depth_scale = 0.001;  // meters per depth PNG unit
  CameraIntrinsics intrinsics;
  std::vector<std::string> class_names;
  int num_frames = -1;  // -1: count rgb/*.png

  void validate() const;
};

SequenceMeta load_meta(const std::filesystem::path& seq_dir);
void write_meta(const std::filesystem::path& seq_dir, const SequenceMeta& meta);
// Number of frames in the sequence: meta.num_frames when set, otherwise the
// number of consecutive rgb/{index:06}.png files starting at 0.
int count_frames(const std::filesystem::path& seq_dir, const SequenceMeta& meta);

struct Frame {
  int index = 0;
  Image<float> rgb;        // H x W x 3, [0, 1]
  Image<float> depth;      // H x W, meters, 0 = invalid
  Image<float> sem_probs;  // H x W x C, each pixel on the simplex
  CameraIntrinsics intrinsics;

  int width() const { return rgb.width; }
  int height() const { return rgb.height; }
  int num_classes() const { return sem_probs.channels; }
  int label_at(int u, int v) const;
  std::vector<double> probs_at(int u, int v) const;
};

std::string frame_name(int index);  // zero-padded to 6 digits

// Clamps negatives and rescales every pixel to unit sum (uniform if all
// zero). Throws Error on non-finite entries.
void normalize_probabilities(Image<float>& probs);

// Reads rgb/, depth/ and seg/ for one index. Throws Error on missing files,
// dimension mismatch, wrong seg byte length or non-finite values.
Frame load_frame(const std::filesystem::path& seq_dir, int index, const SequenceMeta& meta);

// Inverse of load_frame. Depth is quantized with meta.depth_scale.
void write_frame(const std::filesystem::path& seq_dir, const Frame& frame,
                 const SequenceMeta& meta);

// Raw little-endian float32 H x W x C.
Image<float> read_seg_bin(const std::filesystem::path& path, int width, int height, int classes);
void write_seg_bin(const std::filesystem::path& path, const Image<float>& probs);

}  // namespace semsuper
