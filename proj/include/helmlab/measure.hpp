// Copyright (c) 2026 the helmlab authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "helmlab/flow.hpp"
#include "helmlab/observable.hpp"
#include "helmlab/potential.hpp"
#include "helmlab/quadrature.hpp"
#include "helmlab/source.hpp"
#include "helmlab/util.hpp"

namespace helmlab {

// Everything needed to evaluate the limiting measure of the outgoing family:
// potentials, energy data, source geometry and profile, plus quadrature knobs.
struct MeasureSetup {
  PotentialPair pot;
  double e0 = 1.0;
  std::complex<double> e1{0.0, 0.0};
  SourceManifold source;
  Profile profile;

  int sigma_refinement = 64;
  double t_panel = 0.05;      // Gauss-Legendre panel width along rays
  double t_cap = 400.0;       // hard truncation horizon
  double flow_tol = 1e-11;

  MeasureSetup(PotentialPair p, double e0_, std::complex<double> e1_, SourceManifold s, Profile pr)
      : pot(std::move(p)), e0(e0_), e1(e1_), source(std::move(s)), profile(std::move(pr)) {
    if (e1.imag() < 0) throw ConfigError("MeasureSetup: Im e1 must be nonnegative");
  }
};

/// Density of the Liouville source on N_E(Gamma):
///   c(z, xi) = pi (2 pi)^{d-n} A(z)^2 |xi|^{-1} |S_hat(xi)|^2 .
inline double density_c(const MeasureSetup& s, const NormalBundlePoint& node) {
  const int n = s.source.ambient_dim(), d = s.source.intrinsic_dim();
  const double shat = s.profile.fourier(node.xi);
  const double r = node.xi.norm();
  if (r <= 0.0) throw NumericalError("density_c: |xi| = 0 cannot occur on the shell");
  return kPi * std::pow(2.0 * kPi, d - n) * node.amp * node.amp * (shat * shat) / r;
}

struct MeasureEvaluation {
  double value = 0.0;
  double t_max_used = 0.0;
  double tail_bound = 0.0;
  int node_count = 0;
};

namespace detail {

struct RayIntegrand {
  std::function<double(const PhasePoint&)> fn;
  double sup_abs = 0.0;
  double support_radius = 0.0;  // phase-space radius containing the support
};

// Core ray-integral quadrature shared by mu_eval / liouville / incoming ops:
//   sum_j w_j c_j int_0^" fn(phi^t(z_j, xi_j)) e^{-2 t Im e1 - 2 D_j(t)} dt.
// Truncates per node, either by the damping weight (tail below tol) or
// geometrically once the ray has left the support outward with no potential
// left to turn it around.
inline MeasureEvaluation ray_measure(const MeasureSetup& s, const RayIntegrand& g, double tol) {
  const NormalBundleQuadrature quad = sigma_quadrature(s.source, s.pot, s.e0, s.sigma_refinement);
  const double sigma_total = quad.total();
  const double im = s.e1.imag();
  const double r_noreturn =
      std::max({g.support_radius, s.pot.v1_field().support_radius(1e-10), s.source.bounding_radius()}) + 0.5;

  MeasureEvaluation out;
  out.node_count = static_cast<int>(quad.nodes.size());
  const GaussRule rule = gauss_legendre(8);
  std::vector<double> node_vals(quad.nodes.size());
  std::vector<double> tails(quad.nodes.size(), 0.0);

  const double node_budget = 0.5 * tol / std::max<std::size_t>(quad.nodes.size(), 1);
  for (std::size_t j = 0; j < quad.nodes.size(); ++j) {
    const auto& nd = quad.nodes[j];
    const double cj = density_c(s, nd);
    const double node_scale = std::abs(cj) * quad.weights[j];

    DormandPrince stepper([&] {
      DormandPrince::Options o;
      o.rel_tol = o.abs_tol = s.flow_tol;
      o.max_step = 0.05;
      return o;
    }());
    const auto rhs_fn = hamiltonian_rhs(s.pot);
    std::vector<double> y;
    pack(PhasePoint(nd.z, nd.xi), 0.0, y);
    const int n = s.pot.dim();

    double t_prev = 0.0, acc = 0.0;
    bool truncated = false;
    while (!truncated) {
      const double t_hi = t_prev + s.t_panel;
      for (int i = 0; i < 8; ++i) {
        const double t = t_hi - s.t_panel + 0.5 * s.t_panel * (rule.nodes[i] + 1.0);
        stepper.integrate(rhs_fn, t_prev, t, y);
        t_prev = t;
        const PhasePoint wt = unpack(y, n);
        const double weight = std::exp(-2.0 * t * im - 2.0 * y[2 * n]);
        acc += 0.5 * s.t_panel * rule.weights[i] * g.fn(wt) * weight;
      }
      stepper.integrate(rhs_fn, t_prev, t_hi, y);
      t_prev = t_hi;
      out.t_max_used = std::max(out.t_max_used, t_hi);

      const PhasePoint wt = unpack(y, n);
      const double weight = std::exp(-2.0 * t_hi * im - 2.0 * y[2 * n]);

      // geometric stop: outward past every feature and past the support
      if (wt.x.norm() > r_noreturn && dot(wt.x, wt.xi) > 0.0) {
        truncated = true;
        break;
      }
      // damping stop: bound the remaining tail
      if (im > 0.0) {
        const double tail = node_scale * g.sup_abs * weight / (2.0 * im);
        if (tail < node_budget) {
          tails[j] = tail;
          truncated = true;
          break;
        }
      } else if (weight < 1e-16) {
        // weight is nonincreasing, so the leftover is at most the remaining horizon
        tails[j] = node_scale * g.sup_abs * weight * std::max(0.0, s.t_cap - t_hi);
        truncated = true;
        break;
      }
      if (!truncated && t_hi >= s.t_cap) {
        if (weight > 0.5)
          throw NumericalError(
              "ray_measure: truncation horizon reached with damping weight ~ 1; "
              "setup is outside the convergent regime (no absorption on a trapped ray)");
        tails[j] = node_scale * g.sup_abs * weight;
        truncated = true;
      }
    }
    node_vals[j] = quad.weights[j] * cj * acc;
  }

  out.value = pairwise_sum(node_vals);
  out.tail_bound = pairwise_sum(tails);
  return out;
}

}  // namespace detail

/// int q dmu by the explicit ray integral
///   pi (2pi)^{d-n} int_0^inf int_{N_E Gamma} A^2 |xi|^{-1} S_hat^2
///       q(phi^t) e^{-2 t Im E1 - 2 int_0^t V2} dsigma dt.
inline MeasureEvaluation mu_eval(const Observable& q, const MeasureSetup& s, double tol = 1e-8) {
  detail::RayIntegrand g;
  g.fn = [&q](const PhasePoint& w) { return q.value(w); };
  g.sup_abs = q.sup_abs();
  g.support_radius = q.support_radius();
  MeasureEvaluation ev = detail::ray_measure(s, g, tol);
  if (ev.tail_bound > tol)
    throw NumericalError("mu_eval: could not truncate below the requested tolerance");
  return ev;
}

struct LiouvilleResidual {
  double lhs = 0.0;   // int (-H_p + 2 Im E1 + 2 V2) q dmu
  double rhs = 0.0;   // int c q dsigma over N_E(Gamma)
  double residual = 0.0;
};

/// Weak-form Liouville check: transporting q through the measure must match
/// the sigma-quadrature of c * q on the bundle.
inline LiouvilleResidual liouville_residual(const Observable& q, const MeasureSetup& s,
                                            double tol = 1e-8) {
  detail::RayIntegrand g;
  g.fn = [&q, &s](const PhasePoint& w) {
    return -hamiltonian_derivative(q, s.pot, w) +
           (2.0 * s.e1.imag() + 2.0 * s.pot.v2(w.x)) * q.value(w);
  };
  // |H_p q| <= (2 |xi| + sup|grad V1|) sup|grad q| over the support
  const double r = q.support_radius();
  const double xi_max = q.momentum_range().second;
  g.sup_abs = (2.0 * xi_max + s.pot.v1_field().gradient_bound()) * q.gradient_bound() +
              2.0 * (s.e1.imag() + s.pot.v2_field().amplitude_bound()) * q.sup_abs();
  g.support_radius = r;
  const MeasureEvaluation lhs = detail::ray_measure(s, g, tol);

  const NormalBundleQuadrature quad = sigma_quadrature(s.source, s.pot, s.e0, s.sigma_refinement);
  std::vector<double> parts(quad.nodes.size());
  for (std::size_t j = 0; j < quad.nodes.size(); ++j)
    parts[j] = quad.weights[j] * density_c(s, quad.nodes[j]) *
               q.value(PhasePoint(quad.nodes[j].z, quad.nodes[j].xi));
  const double rhs = pairwise_sum(parts);
  return {lhs.value, rhs, lhs.value - rhs};
}

/// mu(q) for q supported in the incoming region Gamma_-(R, d, -sigma); the
/// measure of outgoing rays there vanishes for R past the ray envelope.
inline double incoming_support_check(const Observable& q, const MeasureSetup& s, double R,
                                     double d_mom, double sigma, double tol = 1e-8) {
  if (!(sigma > -1.0 && sigma < 1.0)) throw ConfigError("incoming_support_check: sigma in (-1,1)");
  for (const auto& t : q.terms()) {
    const double ax = t.center.x.norm(), axi = t.center.xi.norm();
    if (ax < R || axi < d_mom || dot(t.center.x, t.center.xi) >= -sigma * ax * axi)
      throw ConfigError("incoming_support_check: observable center outside Gamma_-(R,d,-sigma)");
  }
  return mu_eval(q, s, tol).value;
}

}  // namespace helmlab
