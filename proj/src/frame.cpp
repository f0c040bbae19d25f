#include "semsuper/frame.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "semsuper/png_io.hpp"

namespace semsuper {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

float decode_le_float(const unsigned char* b) {
  std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                       (static_cast<std::uint32_t>(b[2]) << 16) |
                       (static_cast<std::uint32_t>(b[3]) << 24);
  return std::bit_cast<float>(bits);
}

void encode_le_float(float x, unsigned char* b) {
  const auto bits = std::bit_cast<std::uint32_t>(x);
  b[0] = bits & 0xff;
  b[1] = (bits >> 8) & 0xff;
  b[2] = (bits >> 16) & 0xff;
  b[3] = (bits >> 24) & 0xff;
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw Error("missing file: " + p.string());
}

}  // namespace

void SequenceMeta::validate() const {
  if (width <= 0 || height <= 0) throw Error("meta: image size must be positive");
  if (num_classes <= 0) throw Error("meta: C must be positive");
  if (!(depth_scale > 0.0)) throw Error("meta: depth_scale must be positive");
  if (intrinsics.width != width || intrinsics.height != height) {
    throw Error("meta: intrinsics size mismatch");
  }
  intrinsics.validate();
}

SequenceMeta load_meta(const fs::path& seq_dir) {
  const fs::path path = seq_dir / "meta.json";
  require_file(path);
  std::ifstream in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("meta.json parse error: " + std::string(e.what()));
  }
  SequenceMeta m;
  try {
    m.height = j.at("H").get<int>();
    m.width = j.at("W").get<int>();
    m.num_classes = j.at("C").get<int>();
    m.depth_scale = j.at("depth_scale").get<double>();
    m.intrinsics.fx = j.at("fx").get<double>();
    m.intrinsics.fy = j.at("fy").get<double>();
    m.intrinsics.cx = j.at("cx").get<double>();
    m.intrinsics.cy = j.at("cy").get<double>();
    if (j.contains("class_names")) m.class_names = j["class_names"].get<std::vector<std::string>>();
    if (j.contains("num_frames")) m.num_frames = j["num_frames"].get<int>();
  } catch (const json::exception& e) {
    throw Error("meta.json: " + std::string(e.what()));
  }
  m.intrinsics.width = m.width;
  m.intrinsics.height = m.height;
  m.validate();
  return m;
}

void write_meta(const fs::path& seq_dir, const SequenceMeta& meta) {
  json j;
  j["H"] = meta.height;
  j["W"] = meta.width;
  j["C"] = meta.num_classes;
  j["depth_scale"] = meta.depth_scale;
  j["fx"] = meta.intrinsics.fx;
  j["fy"] = meta.intrinsics.fy;
  j["cx"] = meta.intrinsics.cx;
  j["cy"] = meta.intrinsics.cy;
  j["class_names"] = meta.class_names;
  if (meta.num_frames >= 0) j["num_frames"] = meta.num_frames;
  std::ofstream out(seq_dir / "meta.json");
  if (!out) throw Error("cannot write " + (seq_dir / "meta.json").string());
  out << j.dump(2) << "\n";
}

int count_frames(const fs::path& seq_dir, const SequenceMeta& meta) {
  if (meta.num_frames >= 0) return meta.num_frames;
  int n = 0;
  while (fs::is_regular_file(seq_dir / "rgb" / (frame_name(n) + ".png"))) ++n;
  return n;
}

int Frame::label_at(int u, int v) const {
  const float* p = sem_probs.pixel(u, v);
  return static_cast<int>(std::max_element(p, p + sem_probs.channels) - p);
}

std::vector<double> Frame::probs_at(int u, int v) const {
  const float* p = sem_probs.pixel(u, v);
  return std::vector<double>(p, p + sem_probs.channels);
}

std::string frame_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return buf;
}

Image<float> read_seg_bin(const fs::path& path, int width, int height, int classes) {
  require_file(path);
  const auto expected = static_cast<std::uintmax_t>(4) * width * height * classes;
  const auto actual = fs::file_size(path);
  if (actual != expected) {
    throw Error("seg file " + path.string() + " has " + std::to_string(actual) +
                " bytes, expected " + std::to_string(expected));
  }
  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> raw(expected);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw Error("short read: " + path.string());
  Image<float> probs(width, height, classes);
  for (std::size_t i = 0; i < probs.data.size(); ++i) probs.data[i] = decode_le_float(&raw[4 * i]);
  return probs;
}

void write_seg_bin(const fs::path& path, const Image<float>& probs) {
  std::vector<unsigned char> raw(probs.data.size() * 4);
  for (std::size_t i = 0; i < probs.data.size(); ++i) encode_le_float(probs.data[i], &raw[4 * i]);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

void normalize_probabilities(Image<float>& probs) {
  const int C = probs.channels;
  for (std::size_t px = 0; px < probs.pixel_count(); ++px) {
    float* p = probs.data.data() + px * C;
    double sum = 0.0;
    for (int c = 0; c < C; ++c) {
      if (!std::isfinite(p[c])) throw Error("non-finite class probability");
      if (p[c] < 0.0f) p[c] = 0.0f;
      sum += p[c];
    }
    for (int c = 0; c < C; ++c) {
      p[c] = sum > 0.0 ? static_cast<float>(p[c] / sum) : 1.0f / C;
    }
  }
}

Frame load_frame(const fs::path& seq_dir, int index, const SequenceMeta& meta) {
  const std::string name = frame_name(index);
  const fs::path rgb_path = seq_dir / "rgb" / (name + ".png");
  const fs::path depth_path = seq_dir / "depth" / (name + ".png");
  const fs::path seg_path = seq_dir / "seg" / (name + ".bin");
  require_file(rgb_path);
  require_file(depth_path);
  require_file(seg_path);

  Frame f;
  f.index = index;
  f.intrinsics = meta.intrinsics;
  f.rgb = read_png_rgb(rgb_path);
  const Image<std::uint16_t> raw_depth = read_png_gray16(depth_path);
  if (!f.rgb.same_size(meta.width, meta.height)) {
    throw Error("dimension mismatch: rgb is " + std::to_string(f.rgb.width) + "x" +
                std::to_string(f.rgb.height) + ", meta says " + std::to_string(meta.width) + "x" +
                std::to_string(meta.height));
  }
  if (!raw_depth.same_size(meta.width, meta.height)) {
    throw Error("dimension mismatch: depth is " + std::to_string(raw_depth.width) + "x" +
                std::to_string(raw_depth.height) + ", rgb is " + std::to_string(f.rgb.width) +
                "x" + std::to_string(f.rgb.height));
  }
  f.depth = Image<float>(meta.width, meta.height, 1);
  for (std::size_t i = 0; i < raw_depth.data.size(); ++i) {
    f.depth.data[i] = static_cast<float>(raw_depth.data[i] * meta.depth_scale);
  }

  f.sem_probs = read_seg_bin(seg_path, meta.width, meta.height, meta.num_classes);
  try {
    normalize_probabilities(f.sem_probs);
  } catch (const Error&) {
    throw Error("non-finite value in " + seg_path.string());
  }
  return f;
}

void write_frame(const fs::path& seq_dir, const Frame& frame, const SequenceMeta& meta) {
  for (const char* sub : {"rgb", "depth", "seg"}) fs::create_directories(seq_dir / sub);
  const std::string name = frame_name(frame.index);
  write_png_rgb(seq_dir / "rgb" / (name + ".png"), frame.rgb);
  Image<std::uint16_t> depth(frame.depth.width, frame.depth.height, 1);
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    const double q = std::round(frame.depth.data[i] / meta.depth_scale);
    depth.data[i] = static_cast<std::uint16_t>(std::clamp(q, 0.0, 65535.0));
  }
  write_png_gray16(seq_dir / "depth" / (name + ".png"), depth);
  write_seg_bin(seq_dir / "seg" / (name + ".bin"), frame.sem_probs);
}

}  // namespace semsuper
