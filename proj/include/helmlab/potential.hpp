// Copyright (c) 2026 the helmlab authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "helmlab/util.hpp"
#include "helmlab/vec.hpp"

namespace helmlab {

// Closed-form potential families. No runtime expression parser: fields are
// finite sums of Gaussians and flat-top plateau bumps, all with analytic
// gradients and Hessians.

struct GaussianTerm {
  double amplitude = 0.0;
  Vec center;
  double width = 1.0;  // amplitude * exp(-|x-c|^2 / (2 width^2))
};

// amplitude for |x-c| <= r_flat, quintic-smoothstep decay to 0 at r_outer.
// C^2 everywhere, identically zero outside r_outer.
struct PlateauTerm {
  double amplitude = 0.0;
  Vec center;
  double r_flat = 0.5;
  double r_outer = 1.0;
};

namespace detail {
// quintic smoothstep: s(0)=1, s(1)=0, s'(0)=s'(1)=s''(0)=s''(1)=0
inline double smoothfall(double u) { return 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u)); }
inline double smoothfall_d(double u) { return -30.0 * u * u * (1.0 - u) * (1.0 - u); }
inline double smoothfall_dd(double u) { return -60.0 * u * (1.0 - u) * (1.0 - 2.0 * u); }
}  // namespace detail

class ScalarField {
public:
  ScalarField() = default;
  explicit ScalarField(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  bool empty() const { return gaussians_.empty() && plateaus_.empty(); }

  void add_gaussian(double amplitude, const Vec& center, double width) {
    if (width <= 0) throw ConfigError("ScalarField: gaussian width must be positive");
    gaussians_.push_back({amplitude, center, width});
  }
  void add_plateau(double amplitude, const Vec& center, double r_flat, double r_outer) {
    if (!(0.0 <= r_flat && r_flat < r_outer))
      throw ConfigError("ScalarField: plateau needs 0 <= r_flat < r_outer");
    plateaus_.push_back({amplitude, center, r_flat, r_outer});
  }

  double value(const Vec& x) const {
    double s = 0.0;
    for (const auto& g : gaussians_) {
      const double r2 = (x - g.center).norm2();
      s += g.amplitude * std::exp(-r2 / (2.0 * g.width * g.width));
    }
    for (const auto& p : plateaus_) s += plateau_value(p, x);
    return s;
  }

  Vec gradient(const Vec& x) const {
    Vec g = Vec::zero(x.dim());
    for (const auto& t : gaussians_) {
      const Vec d = x - t.center;
      const double w2 = t.width * t.width;
      const double v = t.amplitude * std::exp(-d.norm2() / (2.0 * w2));
      g += (-v / w2) * d;
    }
    for (const auto& p : plateaus_) {
      const Vec d = x - p.center;
      const double r = d.norm();
      if (r <= p.r_flat || r >= p.r_outer || r == 0.0) continue;
      const double u = (r - p.r_flat) / (p.r_outer - p.r_flat);
      const double dv = p.amplitude * detail::smoothfall_d(u) / (p.r_outer - p.r_flat);
      g += (dv / r) * d;
    }
    return g;
  }

  // Hessian as row-major dim x dim; used by variational flow equations.
  void hessian(const Vec& x, double* out) const {
    const int n = x.dim();
    for (int i = 0; i < n * n; ++i) out[i] = 0.0;
    for (const auto& t : gaussians_) {
      const Vec d = x - t.center;
      const double w2 = t.width * t.width;
      const double v = t.amplitude * std::exp(-d.norm2() / (2.0 * w2));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          out[i * n + j] += v * (d[i] * d[j] / (w2 * w2) - (i == j ? 1.0 / w2 : 0.0));
    }
    for (const auto& p : plateaus_) {
      const Vec d = x - p.center;
      const double r = d.norm();
      if (r <= p.r_flat || r >= p.r_outer || r == 0.0) continue;
      const double L = p.r_outer - p.r_flat;
      const double u = (r - p.r_flat) / L;
      const double fp = p.amplitude * detail::smoothfall_d(u) / L;
      const double fpp = p.amplitude * detail::smoothfall_dd(u) / (L * L);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double rr = d[i] * d[j] / (r * r);
          out[i * n + j] += fpp * rr + fp * ((i == j ? 1.0 : 0.0) - rr) / r;
        }
    }
  }

  // sup |value| over R^n (term-wise bound).
  double amplitude_bound() const {
    double s = 0.0;
    for (const auto& g : gaussians_) s += std::abs(g.amplitude);
    for (const auto& p : plateaus_) s += std::abs(p.amplitude);
    return s;
  }

  // sup |grad| over R^n (term-wise bound).
  double gradient_bound() const {
    double s = 0.0;
    for (const auto& g : gaussians_) s += std::abs(g.amplitude) * 0.60653065971263342 / g.width;
    for (const auto& p : plateaus_) s += std::abs(p.amplitude) * 1.875 / (p.r_outer - p.r_flat);
    return s;
  }

  // Radius beyond which the field magnitude is below `tail` (relative to the
  // largest term amplitude); used for escape-radius sanity checks.
  double support_radius(double tail = 1e-12) const {
    double r = 0.0;
    for (const auto& g : gaussians_) {
      if (g.amplitude == 0.0) continue;
      const double rad = g.center.norm() + g.width * std::sqrt(-2.0 * std::log(tail));
      r = std::max(r, rad);
    }
    for (const auto& p : plateaus_)
      if (p.amplitude != 0.0) r = std::max(r, p.center.norm() + p.r_outer);
    return r;
  }

  const std::vector<GaussianTerm>& gaussians() const { return gaussians_; }
  const std::vector<PlateauTerm>& plateaus() const { return plateaus_; }

private:
  static double plateau_value(const PlateauTerm& p, const Vec& x) {
    const double r = (x - p.center).norm();
    if (r >= p.r_outer) return 0.0;
    if (r <= p.r_flat) return p.amplitude;
    return p.amplitude * detail::smoothfall((r - p.r_flat) / (p.r_outer - p.r_flat));
  }

  int dim_ = 1;
  std::vector<GaussianTerm> gaussians_;
  std::vector<PlateauTerm> plateaus_;
};

// The real potential V1 and the absorption V2 >= 0, with decay metadata.
class PotentialPair {
public:
  PotentialPair(int dim, ScalarField v1, ScalarField v2, double rho = 1.0)
      : dim_(dim), v1_(std::move(v1)), v2_(std::move(v2)), rho_(rho) {
    if (rho_ <= 0) throw ConfigError("PotentialPair: decay exponent rho must be > 0");
  }
  static PotentialPair free_space(int dim) {
    return PotentialPair(dim, ScalarField(dim), ScalarField(dim));
  }

  int dim() const { return dim_; }
  double rho() const { return rho_; }

  double v1(const Vec& x) const { return v1_.value(x); }
  Vec grad_v1(const Vec& x) const { return v1_.gradient(x); }
  void hess_v1(const Vec& x, double* out) const { v1_.hessian(x, out); }

  double v2(const Vec& x) const {
    const double v = v2_.value(x);
    if (v < -1e-14) throw NumericalError("PotentialPair: V2 evaluated negative");
    return std::max(v, 0.0);
  }

  const ScalarField& v1_field() const { return v1_; }
  const ScalarField& v2_field() const { return v2_; }

  // Smallest C with |V1(x)|, |V2(x)| <= C <x>^(-rho) over the sample set.
  double fit_decay_constant(const std::vector<Vec>& samples) const {
    double c = 0.0;
    for (const Vec& x : samples) {
      const double w = std::pow(japanese_bracket(x.norm()), rho_);
      c = std::max(c, std::abs(v1_.value(x)) * w);
      c = std::max(c, std::abs(v2_.value(x)) * w);
    }
    return c;
  }

private:
  int dim_;
  ScalarField v1_;
  ScalarField v2_;
  double rho_;
};

// Energy data E_h = e0 + h*e1 with Im e1 >= 0.
struct EnergySpec {
  double e0 = 1.0;
  std::complex<double> e1{0.0, 0.0};
  double h = 1.0;

  EnergySpec() = default;
  EnergySpec(double e0_, std::complex<double> e1_, double h_) : e0(e0_), e1(e1_), h(h_) {
    if (e0 <= 0) throw ConfigError("EnergySpec: e0 must be positive");
    if (e1.imag() < 0) throw ConfigError("EnergySpec: Im e1 must be nonnegative");
    if (!(h > 0 && h <= 1)) throw ConfigError("EnergySpec: h must lie in (0,1]");
  }

  std::complex<double> eh() const { return std::complex<double>(e0, 0.0) + h * e1; }
};

}  // namespace helmlab
