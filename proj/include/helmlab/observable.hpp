// Copyright (c) 2026 the helmlab authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "helmlab/flow.hpp"
#include "helmlab/util.hpp"
#include "helmlab/vec.hpp"

namespace helmlab {

namespace detail {

// Jacobi eigenvalue sweep for small symmetric matrices (m <= 6).
inline void jacobi_eigenvalues(const double* a_in, int m, double* evals) {
  std::array<double, 36> a;
  for (int i = 0; i < m * m; ++i) a[i] = a_in[i];
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < m; ++p)
      for (int q = p + 1; q < m; ++q) off += a[p * m + q] * a[p * m + q];
    if (off < 1e-30) break;
    for (int p = 0; p < m; ++p)
      for (int q = p + 1; q < m; ++q) {
        const double apq = a[p * m + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q * m + q] - a[p * m + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < m; ++k) {
          const double akp = a[k * m + p], akq = a[k * m + q];
          a[k * m + p] = c * akp - s * akq;
          a[k * m + q] = s * akp + c * akq;
        }
        for (int k = 0; k < m; ++k) {
          const double apk = a[p * m + k], aqk = a[q * m + k];
          a[p * m + k] = c * apk - s * aqk;
          a[q * m + k] = s * apk + c * aqk;
        }
      }
  }
  for (int i = 0; i < m; ++i) evals[i] = a[i * m + i];
}

}  // namespace detail

// One anisotropic Gaussian bump on phase space R^{2n}:
//   coefficient * exp(-1/2 (u - center)^T P (u - center)),  P symmetric > 0.
struct ObservableTerm {
  PhasePoint center;
  std::vector<double> inv_cov;  // row-major (2n)^2
  double coefficient = 1.0;
  double effective_radius = 0.0;  // |term| < 1e-12 beyond this radius
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

// Phase-space test function q as a finite Gaussian-bump sum with analytic
// gradient; stands in for C_0^infty observables, with the declared effective
// support playing the role of the compact support.
class Observable {
public:
  explicit Observable(int dim) : n_(dim) {}

  // Diagonal bump: widths per position / momentum axis.
  static Observable gaussian(const PhasePoint& center, double width_x, double width_xi,
                             double coefficient = 1.0) {
    Observable q(center.dim());
    q.add_diagonal(center, width_x, width_xi, coefficient);
    return q;
  }

  void add_diagonal(const PhasePoint& center, double width_x, double width_xi,
                    double coefficient) {
    const int m = 2 * n_;
    std::vector<double> p(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < n_; ++i) p[i * m + i] = 1.0 / (width_x * width_x);
    for (int i = 0; i < n_; ++i) p[(n_ + i) * m + (n_ + i)] = 1.0 / (width_xi * width_xi);
    add_term(center, p, coefficient);
  }

  void add_term(const PhasePoint& center, const std::vector<double>& inv_cov, double coefficient) {
    const int m = 2 * n_;
    if (center.dim() != n_ || inv_cov.size() != static_cast<std::size_t>(m) * m)
      throw ConfigError("Observable: dimension mismatch");
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < i; ++j)
        if (std::abs(inv_cov[i * m + j] - inv_cov[j * m + i]) > 1e-12)
          throw ConfigError("Observable: inverse covariance must be symmetric");
    std::array<double, 6> ev{};
    detail::jacobi_eigenvalues(inv_cov.data(), m, ev.data());
    double lmin = ev[0], lmax = ev[0];
    for (int i = 1; i < m; ++i) {
      lmin = std::min(lmin, ev[i]);
      lmax = std::max(lmax, ev[i]);
    }
    if (lmin <= 0.0) throw ConfigError("Observable: inverse covariance must be positive definite");
    ObservableTerm t;
    t.center = center;
    t.inv_cov = inv_cov;
    t.coefficient = coefficient;
    t.lambda_min = lmin;
    t.lambda_max = lmax;
    const double c = std::max(std::abs(coefficient), 1e-300);
    t.effective_radius = std::sqrt(2.0 * std::log(c * 1e12) / lmin);
    if (!(t.effective_radius > 0)) t.effective_radius = 1.0;
    terms_.push_back(std::move(t));
  }

  int dim() const { return n_; }
  const std::vector<ObservableTerm>& terms() const { return terms_; }

  double value(const PhasePoint& w) const {
    double s = 0.0;
    for (const auto& t : terms_) s += term_value(t, w);
    return s;
  }

  // (dq/dx, dq/dxi)
  std::pair<Vec, Vec> gradient(const PhasePoint& w) const {
    Vec gx = Vec::zero(n_), gxi = Vec::zero(n_);
    const int m = 2 * n_;
    std::array<double, 6> d{}, pd{};
    for (const auto& t : terms_) {
      fill_delta(t, w, d.data());
      for (int i = 0; i < m; ++i) {
        pd[i] = 0.0;
        for (int j = 0; j < m; ++j) pd[i] += t.inv_cov[i * m + j] * d[j];
      }
      const double v = term_value(t, w);
      for (int i = 0; i < n_; ++i) gx[i] -= v * pd[i];
      for (int i = 0; i < n_; ++i) gxi[i] -= v * pd[n_ + i];
    }
    return {gx, gxi};
  }

  double sup_abs() const {
    double s = 0.0;
    for (const auto& t : terms_) s += std::abs(t.coefficient);
    return s;
  }

  // sup |grad q| <= sum |c_k| sqrt(lambda_max_k) e^{-1/2}
  double gradient_bound() const {
    double s = 0.0;
    for (const auto& t : terms_)
      s += std::abs(t.coefficient) * std::sqrt(t.lambda_max) * 0.60653065971263342;
    return s;
  }

  // Bounding radius of the effective support around the origin of phase space.
  double support_radius() const {
    double r = 0.0;
    for (const auto& t : terms_)
      r = std::max(r, std::sqrt(t.center.x.norm2() + t.center.xi.norm2()) + t.effective_radius);
    return r;
  }

  // Range [min, max] of p = |xi|^2 + V1 over the effective support, using the
  // per-axis extent of each term (used for energy-shell disjointness tests).
  std::pair<double, double> momentum_range() const {
    double lo = 1e300, hi = -1e300;
    for (const auto& t : terms_) {
      const double r = t.effective_radius;
      const double ximin = std::max(0.0, t.center.xi.norm() - r);
      const double ximax = t.center.xi.norm() + r;
      lo = std::min(lo, ximin);
      hi = std::max(hi, ximax);
    }
    return {lo, hi};
  }

private:
  static void fill_delta(const ObservableTerm& t, const PhasePoint& w, double* d) {
    const int n = w.dim();
    for (int i = 0; i < n; ++i) d[i] = w.x[i] - t.center.x[i];
    for (int i = 0; i < n; ++i) d[n + i] = w.xi[i] - t.center.xi[i];
  }

  double term_value(const ObservableTerm& t, const PhasePoint& w) const {
    const int m = 2 * n_;
    std::array<double, 6> d{};
    fill_delta(t, w, d.data());
    double quad = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) quad += d[i] * t.inv_cov[i * m + j] * d[j];
    return t.coefficient * std::exp(-0.5 * quad);
  }

  int n_;
  std::vector<ObservableTerm> terms_;
};

/// H_p q = 2 xi . dq/dx - grad V1(x) . dq/dxi evaluated from the analytic
/// gradient of q.
inline double hamiltonian_derivative(const Observable& q, const PotentialPair& pot,
                                     const PhasePoint& w) {
  const auto [gx, gxi] = q.gradient(w);
  return 2.0 * dot(w.xi, gx) - dot(pot.grad_v1(w.x), gxi);
}

}  // namespace helmlab
