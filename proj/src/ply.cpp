#include "semsuper/ply.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace semsuper {

static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");

namespace {

constexpr std::array<std::array<unsigned char, 3>, 8> kPalette{{{230, 80, 80},
                                                                 {80, 170, 230},
                                                                 {240, 200, 60},
                                                                 {120, 200, 100},
                                                                 {190, 110, 220},
                                                                 {250, 150, 60},
                                                                 {100, 220, 200},
                                                                 {160, 160, 160}}};

unsigned char to_byte(double x) {
  return static_cast<unsigned char>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0));
}

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

const char* kHeaderProperties =
    "property float x\n"
    "property float y\n"
    "property float z\n"
    "property float nx\n"
    "property float ny\n"
    "property float nz\n"
    "property uchar red\n"
    "property uchar green\n"
    "property uchar blue\n"
    "property float radius\n"
    "property float confidence\n"
    "property int timestamp\n"
    "property int label\n"
    "property uchar label_red\n"
    "property uchar label_green\n"
    "property uchar label_blue\n"
    "property uint id\n";

}  // namespace

Vec3 label_color(int label) {
  const auto& c = kPalette[static_cast<std::size_t>(std::max(label, 0)) % kPalette.size()];
  return Vec3(c[0], c[1], c[2]) / 255.0;
}

void write_surfel_ply(const std::filesystem::path& path, const std::vector<Surfel>& surfels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << surfels.size() << "\n"
      << kHeaderProperties << "end_header\n";
  for (const Surfel& s : surfels) {
    for (int k = 0; k < 3; ++k) put<float>(out, static_cast<float>(s.position[k]));
    for (int k = 0; k < 3; ++k) put<float>(out, static_cast<float>(s.normal[k]));
    for (int k = 0; k < 3; ++k) put<unsigned char>(out, to_byte(s.color[k]));
    put<float>(out, static_cast<float>(s.radius));
    put<float>(out, static_cast<float>(s.confidence));
    put<std::int32_t>(out, s.timestamp);
    put<std::int32_t>(out, s.label);
    const Vec3 lc = label_color(s.label);
    for (int k = 0; k < 3; ++k) put<unsigned char>(out, to_byte(lc[k]));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.id));
  }
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<Surfel> read_surfel_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string line, header;
  std::size_t count = 0;
  bool have_count = false;
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    if (line.rfind("element vertex ", 0) == 0) {
      count = std::stoull(line.substr(15));
      have_count = true;
    } else if (line.rfind("property", 0) == 0) {
      header += line + "\n";
    }
  }
  if (!have_count || header != kHeaderProperties) throw Error("unsupported PLY layout: " + path.string());
  std::vector<Surfel> out(count);
  for (Surfel& s : out) {
    for (int k = 0; k < 3; ++k) s.position[k] = get<float>(in);
    for (int k = 0; k < 3; ++k) s.normal[k] = get<float>(in);
    for (int k = 0; k < 3; ++k) s.color[k] = get<unsigned char>(in) / 255.0;
    s.radius = get<float>(in);
    s.confidence = get<float>(in);
    s.timestamp = get<std::int32_t>(in);
    s.label = get<std::int32_t>(in);
    for (int k = 0; k < 3; ++k) get<unsigned char>(in);
    s.id = get<std::uint32_t>(in);
  }
  if (!in) throw Error("truncated PLY: " + path.string());
  return out;
}

}  // namespace semsuper
