// Copyright (c) 2026 the helmlab authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "helmlab/fft.hpp"
#include "helmlab/grid.hpp"
#include "helmlab/observable.hpp"
#include "helmlab/util.hpp"

namespace helmlab {

// Phase-space lattice carrying W(x, xi). The momentum lattice is the dual of
// the periodized position grid: xi_k = pi h k / (N dx), k = -N/2 .. N/2 - 1,
// which puts the window at |xi| <= pi h / (2 dx).
struct WignerGrid {
  Grid grid;          // position grid of the transformed field
  double h = 1.0;
  int nxi = 0;        // momentum points per axis (= position points)
  double xi_spacing = 0.0;
  std::vector<double> values;  // [x-major][xi], real

  double xi(int k) const { return (k - nxi / 2) * xi_spacing; }
  double xi_max() const { return 0.5 * nxi * xi_spacing; }

  // W integrated over the whole lattice; equals ||u||^2 identically.
  double total_mass() const {
    std::vector<double> parts(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) parts[i] = values[i];
    double cell = grid.cell_volume();
    for (int d = 0; d < grid.dim(); ++d) cell *= xi_spacing;
    return pairwise_sum(parts) * cell;
  }
};

namespace detail {

// One x-row of the periodized discrete Wigner transform (1D field):
// row_k = (2 dx / 2 pi h) * DFT_j[ u[m+j] conj(u[m-j]) ](k), fftshifted.
inline void wigner_row_1d(const std::vector<cplx>& u, int m, double dx, double h,
                          std::vector<cplx>& work, std::vector<double>& row) {
  const int n = static_cast<int>(u.size());
  work.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const int ip = (m + j) % n;
    const int im = ((m - j) % n + n) % n;
    work[static_cast<std::size_t>(j)] = u[static_cast<std::size_t>(ip)] * std::conj(u[static_cast<std::size_t>(im)]);
  }
  fft_forward(work);
  row.resize(static_cast<std::size_t>(n));
  const double pref = 2.0 * dx / (2.0 * kPi * h);
  // fftshift so xi ascends
  for (int k = 0; k < n; ++k) {
    const int src = (k + n / 2) % n;
    row[static_cast<std::size_t>(k)] = pref * work[static_cast<std::size_t>(src)].real();
  }
}

}  // namespace detail

/// Full Wigner transform of a 1D or 2D field via FFT over the separation
/// variable. Real-valued by the conjugate symmetry of the autocorrelation.
inline WignerGrid wigner_transform(const DiscreteField& u) {
  const Grid& g = u.grid;
  const int n = g.points_per_axis();
  WignerGrid w;
  w.grid = g;
  w.h = u.h;
  w.nxi = n;
  w.xi_spacing = kPi * u.h / (n * g.spacing());

  if (g.dim() == 1) {
    w.values.assign(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<cplx> work;
    std::vector<double> row;
    for (int m = 0; m < n; ++m) {
      detail::wigner_row_1d(u.values, m, g.spacing(), u.h, work, row);
      std::copy(row.begin(), row.end(), w.values.begin() + static_cast<std::size_t>(m) * n);
    }
    return w;
  }

  // 2D: W[(mx,my)][(kx,ky)]; guard the n^4 footprint.
  const std::size_t total = static_cast<std::size_t>(n) * n * n * n;
  if (total > (1u << 26))
    throw ConfigError("wigner_transform: 2D lattice too large; use weyl_pairing instead");
  w.values.assign(total, 0.0);
  std::vector<cplx> work(static_cast<std::size_t>(n) * n);
  const double pref = sq(2.0 * g.spacing() / (2.0 * kPi * u.h));
  for (int my = 0; my < n; ++my)
    for (int mx = 0; mx < n; ++mx) {
      for (int j2 = 0; j2 < n; ++j2)
        for (int j1 = 0; j1 < n; ++j1) {
          const int ip1 = (mx + j1) % n, im1 = ((mx - j1) % n + n) % n;
          const int ip2 = (my + j2) % n, im2 = ((my - j2) % n + n) % n;
          work[static_cast<std::size_t>(j2) * n + j1] =
              u.values[g.index(ip1, ip2)] * std::conj(u.values[g.index(im1, im2)]);
        }
      fft2_forward(work, static_cast<std::size_t>(n), static_cast<std::size_t>(n));
      double* dst = w.values.data() +
                    (static_cast<std::size_t>(my) * n + mx) * static_cast<std::size_t>(n) * n;
      for (int k2 = 0; k2 < n; ++k2) {
        const int s2 = (k2 + n / 2) % n;
        for (int k1 = 0; k1 < n; ++k1) {
          const int s1 = (k1 + n / 2) % n;
          dst[static_cast<std::size_t>(k2) * n + k1] =
              pref * work[static_cast<std::size_t>(s2) * n + s1].real();
        }
      }
    }
  return w;
}

/// <Op^w(q) u, u> = integral of q * W over phase space, restricted to the
/// x-rows where q is nonzero. Errors out if q needs momenta outside the
/// lattice window.
inline double weyl_pairing(const Observable& q, const DiscreteField& u) {
  const Grid& g = u.grid;
  const int n = g.points_per_axis();
  const double dx = g.spacing();
  const double xi_spacing = kPi * u.h / (n * dx);
  const double xi_max = 0.5 * n * xi_spacing;

  for (const auto& t : q.terms()) {
    for (int d = 0; d < g.dim(); ++d)
      if (std::abs(t.center.xi[d]) + t.effective_radius > xi_max)
        throw ConfigError("weyl_pairing: observable support overflows the momentum window");
  }

  auto row_needed = [&](const Vec& x) {
    for (const auto& t : q.terms())
      if ((x - t.center.x).norm() <= t.effective_radius) return true;
    return false;
  };

  std::vector<double> parts;
  if (g.dim() == 1) {
    std::vector<cplx> work;
    std::vector<double> row;
    PhasePoint w{Vec(1), Vec(1)};
    for (int m = 0; m < n; ++m) {
      w.x[0] = g.coord(m);
      if (!row_needed(w.x)) continue;
      detail::wigner_row_1d(u.values, m, dx, u.h, work, row);
      double acc = 0.0;
      for (int k = 0; k < n; ++k) {
        w.xi[0] = (k - n / 2) * xi_spacing;
        const double qv = q.value(w);
        if (qv != 0.0) acc += qv * row[static_cast<std::size_t>(k)];
      }
      parts.push_back(acc);
    }
    return pairwise_sum(parts) * dx * xi_spacing;
  }

  // 2D: transform one x-point at a time.
  std::vector<cplx> work(static_cast<std::size_t>(n) * n);
  const double pref = sq(2.0 * dx / (2.0 * kPi * u.h));
  PhasePoint w{Vec(2), Vec(2)};
  for (int my = 0; my < n; ++my)
    for (int mx = 0; mx < n; ++mx) {
      w.x[0] = g.coord(mx);
      w.x[1] = g.coord(my);
      if (!row_needed(w.x)) continue;
      for (int j2 = 0; j2 < n; ++j2)
        for (int j1 = 0; j1 < n; ++j1) {
          const int ip1 = (mx + j1) % n, im1 = ((mx - j1) % n + n) % n;
          const int ip2 = (my + j2) % n, im2 = ((my - j2) % n + n) % n;
          work[static_cast<std::size_t>(j2) * n + j1] =
              u.values[g.index(ip1, ip2)] * std::conj(u.values[g.index(im1, im2)]);
        }
      fft2_forward(work, static_cast<std::size_t>(n), static_cast<std::size_t>(n));
      double acc = 0.0;
      for (int k2 = 0; k2 < n; ++k2) {
        w.xi[1] = (k2 - n / 2) * xi_spacing;
        const int s2 = (k2 + n / 2) % n;
        for (int k1 = 0; k1 < n; ++k1) {
          w.xi[0] = (k1 - n / 2) * xi_spacing;
          const double qv = q.value(w);
          if (qv != 0.0) {
            const int s1 = (k1 + n / 2) % n;
            acc += qv * pref * work[static_cast<std::size_t>(s2) * n + s1].real();
          }
        }
      }
      parts.push_back(acc);
    }
  return pairwise_sum(parts) * dx * dx * xi_spacing * xi_spacing;
}

namespace detail {

// n x n symmetric inverse for n <= 2 (used by the closed-form Weyl kernel)
struct SmallSym {
  int n = 1;
  double a = 1.0, b = 0.0, d = 1.0;  // [[a, b], [b, d]]

  double det() const { return n == 1 ? a : a * d - b * b; }
  // solve M y = w for complex w
  void solve(const cplx* w, cplx* y) const {
    if (n == 1) {
      y[0] = w[0] / a;
    } else {
      const double dt = det();
      y[0] = (d * w[0] - b * w[1]) / dt;
      y[1] = (a * w[1] - b * w[0]) / dt;
    }
  }
};

}  // namespace detail

/// Reference route for the Moyal check: applies the Weyl operator through its
/// integral kernel, with the xi-integral of the Gaussian observable done in
/// closed form. Cost O(N^2) over grid pairs; independent of the FFT path.
inline double weyl_pairing_direct(const Observable& q, const DiscreteField& u) {
  const Grid& g = u.grid;
  const int nn = g.dim();
  const std::size_t total = g.size();
  if (total > 16384u) throw ConfigError("weyl_pairing_direct: reference route is O(N^2), keep N small");
  const double h = u.h;

  std::vector<cplx> opu(total, cplx(0, 0));
  const int m = 2 * nn;
  for (const auto& t : q.terms()) {
    detail::SmallSym b;
    b.n = nn;
    b.a = t.inv_cov[static_cast<std::size_t>(nn) * m + nn];
    if (nn == 2) {
      b.b = t.inv_cov[static_cast<std::size_t>(nn) * m + nn + 1];
      b.d = t.inv_cov[static_cast<std::size_t>(nn + 1) * m + nn + 1];
    }
    const double detb = b.det();
    const double gauss_pref = std::pow(2.0 * kPi, 0.5 * nn) / std::sqrt(detb);

    for (std::size_t i = 0; i < total; ++i) {
      const Vec xi_pt = g.point(i);
      cplx acc(0.0, 0.0);
      for (std::size_t j = 0; j < total; ++j) {
        if (u.values[j] == cplx(0.0, 0.0)) continue;
        const Vec yj = g.point(j);
        const Vec mid = 0.5 * (xi_pt + yj);
        const Vec r = xi_pt - yj;
        // quadratic form in the midpoint block
        double quad = 0.0;
        double dmid[2];
        for (int a = 0; a < nn; ++a) dmid[a] = mid[a] - t.center.x[a];
        for (int a = 0; a < nn; ++a)
          for (int c = 0; c < nn; ++c) quad += dmid[a] * t.inv_cov[a * m + c] * dmid[c];
        // linear coefficient w = -Pxxi^T dmid + i r / h
        cplx wlin[2], sol[2];
        for (int a = 0; a < nn; ++a) {
          double cross = 0.0;
          for (int c = 0; c < nn; ++c) cross += dmid[c] * t.inv_cov[c * m + nn + a];
          wlin[a] = cplx(-cross, r[a] / h);
        }
        b.solve(wlin, sol);
        cplx expo(-0.5 * quad, 0.0);
        for (int a = 0; a < nn; ++a) expo += 0.5 * wlin[a] * sol[a];
        // phase from expanding xi around the term's momentum center
        double phase = 0.0;
        for (int a = 0; a < nn; ++a) phase += r[a] * t.center.xi[a];
        acc += t.coefficient * gauss_pref * std::exp(expo + cplx(0.0, phase / h)) * u.values[j];
      }
      opu[i] += acc * std::pow(2.0 * kPi * h, -nn) * g.cell_volume();
    }
  }

  std::vector<double> parts(total);
  for (std::size_t i = 0; i < total; ++i) parts[i] = std::real(std::conj(u.values[i]) * opu[i]);
  return pairwise_sum(parts) * g.cell_volume();
}

/// Clipped Wigner mass in the incoming cone
///   { |x| >= R, |xi| >= d, <x, xi> < -sigma |x| |xi| }.
/// Negative Wigner values are clipped to zero here (mass diagnostic only;
/// pairings keep them). `stride` subsamples the x-lattice.
inline double incoming_mass(const DiscreteField& u, double R, double d_mom, double sigma,
                            int stride = 4) {
  const Grid& g = u.grid;
  const int n = g.points_per_axis();
  const double dx = g.spacing();
  const double xi_spacing = kPi * u.h / (n * dx);

  std::vector<double> parts;
  if (g.dim() == 1) {
    std::vector<cplx> work;
    std::vector<double> row;
    for (int m = 0; m < n; m += stride) {
      const double x = g.coord(m);
      if (std::abs(x) < R) continue;
      detail::wigner_row_1d(u.values, m, dx, u.h, work, row);
      double acc = 0.0;
      for (int k = 0; k < n; ++k) {
        const double xi = (k - n / 2) * xi_spacing;
        if (std::abs(xi) < d_mom) continue;
        if (x * xi >= -sigma * std::abs(x) * std::abs(xi)) continue;
        acc += std::max(row[static_cast<std::size_t>(k)], 0.0);
      }
      parts.push_back(acc);
    }
    return pairwise_sum(parts) * (stride * dx) * xi_spacing;
  }

  std::vector<cplx> work(static_cast<std::size_t>(n) * n);
  const double pref = sq(2.0 * dx / (2.0 * kPi * u.h));
  for (int my = 0; my < n; my += stride)
    for (int mx = 0; mx < n; mx += stride) {
      const Vec x{g.coord(mx), g.coord(my)};
      const double ax = x.norm();
      if (ax < R) continue;
      for (int j2 = 0; j2 < n; ++j2)
        for (int j1 = 0; j1 < n; ++j1) {
          const int ip1 = (mx + j1) % n, im1 = ((mx - j1) % n + n) % n;
          const int ip2 = (my + j2) % n, im2 = ((my - j2) % n + n) % n;
          work[static_cast<std::size_t>(j2) * n + j1] =
              u.values[g.index(ip1, ip2)] * std::conj(u.values[g.index(im1, im2)]);
        }
      fft2_forward(work, static_cast<std::size_t>(n), static_cast<std::size_t>(n));
      double acc = 0.0;
      for (int k2 = 0; k2 < n; ++k2)
        for (int k1 = 0; k1 < n; ++k1) {
          const Vec xi{(k1 - n / 2) * xi_spacing, (k2 - n / 2) * xi_spacing};
          const double axi = xi.norm();
          if (axi < d_mom) continue;
          if (dot(x, xi) >= -sigma * ax * axi) continue;
          const int s1 = (k1 + n / 2) % n, s2 = (k2 + n / 2) % n;
          acc += std::max(pref * work[static_cast<std::size_t>(s2) * n + s1].real(), 0.0);
        }
      parts.push_back(acc);
    }
  return pairwise_sum(parts) * sq(stride * dx) * sq(xi_spacing);
}

}  // namespace helmlab
