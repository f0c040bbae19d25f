#include "semsuper/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "semsuper/types.hpp"

namespace semsuper {

namespace {

double kl_to_mixture(std::span<const double> p, std::span<const double> q) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    const double m = 0.5 * (p[i] + q[i]);
    sum += p[i] * std::log(p[i] / m);
  }
  return sum;
}

// 1D squared distance transform of sampled function f over the sites listed
// in `sites` (those with finite f). Writes squared distance and nearest site.
void lower_envelope(const std::vector<double>& f, const std::vector<int>& sites,
                    std::vector<double>& d, std::vector<int>& arg, std::vector<int>& v,
                    std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  const double inf = std::numeric_limits<double>::infinity();
  if (sites.empty()) {
    std::fill(d.begin(), d.end(), inf);
    std::fill(arg.begin(), arg.end(), -1);
    return;
  }
  int k = 0;
  v[0] = sites[0];
  z[0] = -inf;
  z[1] = inf;
  for (std::size_t s = 1; s < sites.size(); ++s) {
    const int q = sites[s];
    double x;
    while (true) {
      const int p = v[k];
      x = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (x <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (x <= z[k]) {
      // k == 0 and the new parabola dominates everywhere.
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = x;
    z[k + 1] = inf;
  }
  k = 0;
  for (int i = 0; i < n; ++i) {
    while (z[k + 1] < i) ++k;
    const double diff = i - v[k];
    d[i] = diff * diff + f[v[k]];
    arg[i] = v[k];
  }
}

}  // namespace

double jsd(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("jsd: length mismatch");
  const double value = 0.5 * kl_to_mixture(a, b) + 0.5 * kl_to_mixture(b, a);
  return std::clamp(value, 0.0, std::log(2.0));
}

double semantic_weight(std::span<const double> a, std::span<const double> b) {
  return std::exp(-jsd(a, b));
}

DistanceField distance_transform(const Grid<std::uint8_t>& seeds) {
  const int W = seeds.width, H = seeds.height;
  const double inf = std::numeric_limits<double>::infinity();
  DistanceField out{Grid<float>(W, H, 0.0f), Grid<std::int32_t>(W, H, -1)};

  // Columns: squared distance to the nearest seed in the same column.
  Grid<double> col_d(W, H, inf);
  Grid<std::int32_t> col_arg(W, H, -1);
  {
    std::vector<double> f(H), d(H), z(H + 1);
    std::vector<int> arg(H), v(H), sites;
    for (int u = 0; u < W; ++u) {
      sites.clear();
      for (int r = 0; r < H; ++r) {
        f[r] = seeds(u, r) ? 0.0 : inf;
        if (seeds(u, r)) sites.push_back(r);
      }
      lower_envelope(f, sites, d, arg, v, z);
      for (int r = 0; r < H; ++r) {
        col_d(u, r) = d[r];
        col_arg(u, r) = arg[r];
      }
    }
  }
  // Rows over the column result.
  {
    std::vector<double> f(W), d(W), z(W + 1);
    std::vector<int> arg(W), v(W), sites;
    for (int r = 0; r < H; ++r) {
      sites.clear();
      for (int u = 0; u < W; ++u) {
        f[u] = col_d(u, r);
        if (std::isfinite(f[u])) sites.push_back(u);
      }
      lower_envelope(f, sites, d, arg, v, z);
      for (int u = 0; u < W; ++u) {
        if (arg[u] < 0) {
          out.distance(u, r) = std::numeric_limits<float>::infinity();
          out.nearest(u, r) = -1;
          continue;
        }
        const int su = arg[u];
        const int sv = col_arg(su, r);
        out.distance(u, r) = static_cast<float>(std::sqrt(d[u]));
        out.nearest(u, r) = sv * W + su;
      }
    }
  }
  return out;
}

Grid<std::int32_t> label_map(const Image<float>& sem_probs) {
  Grid<std::int32_t> labels(sem_probs.width, sem_probs.height, 0);
  const int C = sem_probs.channels;
  for (int v = 0; v < sem_probs.height; ++v) {
    for (int u = 0; u < sem_probs.width; ++u) {
      const float* p = sem_probs.pixel(u, v);
      labels(u, v) = static_cast<std::int32_t>(std::max_element(p, p + C) - p);
    }
  }
  return labels;
}

SemanticBoundaryField build_boundary_field(const Image<float>& sem_probs) {
  SemanticBoundaryField field;
  field.labels = label_map(sem_probs);
  const int W = sem_probs.width, H = sem_probs.height, C = sem_probs.channels;
  field.classes.resize(C);
  for (int c = 0; c < C; ++c) {
    Grid<std::uint8_t> seeds(W, H, 0);
    bool any = false;
    for (int v = 0; v < H; ++v) {
      for (int u = 0; u < W; ++u) {
        if (field.labels(u, v) != c) continue;
        const bool border = u == 0 || v == 0 || u == W - 1 || v == H - 1;
        const bool edge = border || field.labels(u - 1, v) != c || field.labels(u + 1, v) != c ||
                          field.labels(u, v - 1) != c || field.labels(u, v + 1) != c;
        if (edge) {
          seeds(u, v) = 1;
          any = true;
        }
      }
    }
    field.classes[c].present = any;
    if (any) field.classes[c].field = distance_transform(seeds);
  }
  return field;
}

DistanceField semantic_edge_distance(const Grid<std::int32_t>& labels) {
  const int W = labels.width, H = labels.height;
  Grid<std::uint8_t> seeds(W, H, 0);
  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      const int l = labels(u, v);
      const bool edge = (u > 0 && labels(u - 1, v) != l) || (u + 1 < W && labels(u + 1, v) != l) ||
                        (v > 0 && labels(u, v - 1) != l) || (v + 1 < H && labels(u, v + 1) != l);
      seeds(u, v) = edge ? 1 : 0;
    }
  }
  return distance_transform(seeds);
}

}  // namespace semsuper
