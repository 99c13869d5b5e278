// Copyright (c) 2026 the helmlab authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "helmlab/util.hpp"

namespace helmlab {

// Gauss-Legendre nodes/weights on [-1,1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Newton iteration on Legendre polynomials; exact enough for any m we use.
inline GaussRule gauss_legendre(int m) {
  GaussRule r;
  r.nodes.resize(m);
  r.weights.resize(m);
  for (int i = 0; i < m; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (m + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= m; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = m * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    r.nodes[i] = x;
    r.weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
  }
  return r;
}

// Composite Gauss-Legendre over [a,b] with `panels` panels of `m` points.
template <typename F>
double integrate_gl(F&& f, double a, double b, int panels, int m = 8) {
  static thread_local int cached_m = -1;
  static thread_local GaussRule rule;
  if (cached_m != m) {
    rule = gauss_legendre(m);
    cached_m = m;
  }
  const double w = (b - a) / panels;
  std::vector<double> parts(static_cast<std::size_t>(panels));
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * w;
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += rule.weights[i] * f(lo + 0.5 * w * (rule.nodes[i] + 1.0));
    parts[static_cast<std::size_t>(p)] = 0.5 * w * s;
  }
  return pairwise_sum(parts);
}

namespace detail {

// Adaptive Simpson with error tracking.
template <typename F>
double simpson_rec(F& f, double a, double b, double fa, double fm, double fb, double whole,
                   double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0) throw NumericalError("adaptive quadrature: recursion limit");
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson on [a,b]; independent oracle quadrature for tests.
template <typename F>
double integrate_adaptive(F&& f, double a, double b, double tol = 1e-10, int max_depth = 60) {
  if (a == b) return 0.0;
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// \int_0^inf g(t) dt for g with exponential-type decay: adaptive on dyadic
// windows until the window contribution falls below tol.
template <typename F>
double integrate_to_infinity(F&& g, double tol = 1e-10, double first = 1.0, int max_windows = 60) {
  double total = 0.0, lo = 0.0, w = first;
  for (int k = 0; k < max_windows; ++k) {
    const double part = integrate_adaptive(g, lo, lo + w, tol * 0.25);
    total += part;
    lo += w;
    w *= 2.0;
    if (std::abs(part) < tol && k > 2) return total;
  }
  throw NumericalError("integrate_to_infinity: no decay detected");
}

}  // namespace helmlab
