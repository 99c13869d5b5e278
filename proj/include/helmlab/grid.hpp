// Copyright (c) 2026 the helmlab authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "helmlab/util.hpp"
#include "helmlab/vec.hpp"

namespace helmlab {

// Uniform grid on [-L, L]^n (n = 1 or 2), nodes x_i = -L + i*dx, i = 0..N-1,
// dx = 2L / N. The last cell stops one spacing short of +L so that the grid
// is also a periodic lattice of period 2L for FFT-based transforms.
struct AbsorbingLayer {
  double width = 0.0;     // 0 disables the layer
  double strength = 0.0;  // peak of the cubic ramp added to V2
};

class Grid {
public:
  Grid() = default;
  Grid(int dim, double half_extent, int points_per_axis, AbsorbingLayer layer = {})
      : dim_(dim), half_extent_(half_extent), n_(points_per_axis), layer_(layer) {
    if (dim < 1 || dim > 2) throw ConfigError("Grid: dim must be 1 or 2");
    if (half_extent <= 0 || points_per_axis < 4) throw ConfigError("Grid: bad extent or size");
  }

  // Smallest power-of-two grid with dx <= h/ppw_factor (points per h-scale).
  static Grid for_wavelength(int dim, double half_extent, double h, double ppw_factor = 4.0,
                             AbsorbingLayer layer = {}) {
    const double dx_max = h / ppw_factor;
    int n = 8;
    while (2.0 * half_extent / n > dx_max) {
      n *= 2;
      if (n > (1 << 24)) throw ConfigError("Grid: resolution request too large");
    }
    return Grid(dim, half_extent, n, layer);
  }

  int dim() const { return dim_; }
  int points_per_axis() const { return n_; }
  double half_extent() const { return half_extent_; }
  double spacing() const { return 2.0 * half_extent_ / n_; }
  std::size_t size() const {
    std::size_t s = 1;
    for (int d = 0; d < dim_; ++d) s *= static_cast<std::size_t>(n_);
    return s;
  }
  double cell_volume() const {
    double v = 1.0;
    for (int d = 0; d < dim_; ++d) v *= spacing();
    return v;
  }
  const AbsorbingLayer& layer() const { return layer_; }

  double coord(int i) const { return -half_extent_ + i * spacing(); }

  Vec point(std::size_t flat) const {
    Vec x(dim_);
    if (dim_ == 1) {
      x[0] = coord(static_cast<int>(flat));
    } else {
      x[0] = coord(static_cast<int>(flat % static_cast<std::size_t>(n_)));
      x[1] = coord(static_cast<int>(flat / static_cast<std::size_t>(n_)));
    }
    return x;
  }

  std::size_t index(int i, int j = 0) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(i);
  }

  // Cubic absorbing ramp, added to V2 near the box boundary per axis.
  double layer_profile(const Vec& x) const {
    if (layer_.width <= 0.0 || layer_.strength <= 0.0) return 0.0;
    double s = 0.0;
    for (int d = 0; d < dim_; ++d) {
      const double depth = std::abs(x[d]) - (half_extent_ - layer_.width);
      if (depth > 0.0) {
        const double u = std::min(1.0, depth / layer_.width);
        s += layer_.strength * u * u * u;
      }
    }
    return s;
  }

  void require_resolves(double h, double factor = 4.0) const {
    if (spacing() > h / factor + 1e-15)
      throw ConfigError("Grid: under-resolved (need dx <= h/" + std::to_string(factor) + ")");
  }

private:
  int dim_ = 1;
  double half_extent_ = 1.0;
  int n_ = 8;
  AbsorbingLayer layer_;
};

// Complex field sampled on a Grid.
struct DiscreteField {
  Grid grid;
  double h = 1.0;
  std::vector<cplx> values;

  DiscreteField() = default;
  DiscreteField(Grid g, double h_) : grid(g), h(h_), values(g.size(), cplx{0.0, 0.0}) {}

  cplx& at(std::size_t i) { return values[i]; }
  cplx at(std::size_t i) const { return values[i]; }

  double norm2_sq() const {
    std::vector<double> parts(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) parts[i] = std::norm(values[i]);
    return pairwise_sum(parts) * grid.cell_volume();
  }
  double norm2() const { return std::sqrt(norm2_sq()); }
};

/// L^{2,alpha} norm (sum <x>^{2 alpha} |u|^2 dx)^{1/2}; interior_fraction
/// restricts to |x_d| <= fraction * L on every axis.
inline double weighted_norm(const DiscreteField& u, double alpha, double interior_fraction = 1.0) {
  const Grid& g = u.grid;
  const double cut = interior_fraction * g.half_extent();
  std::vector<double> parts;
  parts.reserve(u.values.size());
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    const Vec x = g.point(i);
    bool inside = true;
    for (int d = 0; d < g.dim(); ++d)
      if (std::abs(x[d]) > cut) inside = false;
    if (!inside) continue;
    const double w = std::pow(japanese_bracket(x.norm()), 2.0 * alpha);
    parts.push_back(w * std::norm(u.values[i]));
  }
  return std::sqrt(pairwise_sum(parts) * g.cell_volume());
}

// --- serialization ------------------------------------------------------
// Binary layout: magic "HLF1", int32 dim, int32 n, float64 half_extent,
// float64 h, float64 layer_width, float64 layer_strength, then size()
// (re, im) float64 pairs, little-endian.

inline void save_field(const DiscreteField& u, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("save_field: cannot open " + path);
  os.write("HLF1", 4);
  const std::int32_t dim = u.grid.dim(), n = u.grid.points_per_axis();
  const double ext = u.grid.half_extent(), h = u.h;
  const double lw = u.grid.layer().width, ls = u.grid.layer().strength;
  os.write(reinterpret_cast<const char*>(&dim), 4);
  os.write(reinterpret_cast<const char*>(&n), 4);
  os.write(reinterpret_cast<const char*>(&ext), 8);
  os.write(reinterpret_cast<const char*>(&h), 8);
  os.write(reinterpret_cast<const char*>(&lw), 8);
  os.write(reinterpret_cast<const char*>(&ls), 8);
  for (const cplx& v : u.values) {
    const double re = v.real(), im = v.imag();
    os.write(reinterpret_cast<const char*>(&re), 8);
    os.write(reinterpret_cast<const char*>(&im), 8);
  }
  if (!os) throw ConfigError("save_field: write failed for " + path);
}

inline DiscreteField load_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("load_field: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "HLF1", 4) != 0)
    throw ConfigError("load_field: bad magic in " + path);
  std::int32_t dim = 0, n = 0;
  double ext = 0, h = 0, lw = 0, ls = 0;
  is.read(reinterpret_cast<char*>(&dim), 4);
  is.read(reinterpret_cast<char*>(&n), 4);
  is.read(reinterpret_cast<char*>(&ext), 8);
  is.read(reinterpret_cast<char*>(&h), 8);
  is.read(reinterpret_cast<char*>(&lw), 8);
  is.read(reinterpret_cast<char*>(&ls), 8);
  DiscreteField u(Grid(dim, ext, n, AbsorbingLayer{lw, ls}), h);
  for (auto& v : u.values) {
    double re = 0, im = 0;
    is.read(reinterpret_cast<char*>(&re), 8);
    is.read(reinterpret_cast<char*>(&im), 8);
    v = cplx(re, im);
  }
  if (!is) throw ConfigError("load_field: truncated file " + path);
  return u;
}

// 17 significant digits: round-trips doubles exactly in CSV output.
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void export_field_csv(const DiscreteField& u, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("export_field_csv: cannot open " + path);
  os << "x0";
  if (u.grid.dim() == 2) os << ",x1";
  os << ",re,im\n";
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    const Vec x = u.grid.point(i);
    os << fmt_g17(x[0]);
    if (u.grid.dim() == 2) os << ',' << fmt_g17(x[1]);
    os << ',' << fmt_g17(u.values[i].real()) << ',' << fmt_g17(u.values[i].imag()) << '\n';
  }
}

}  // namespace helmlab
