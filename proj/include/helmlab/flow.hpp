// Copyright (c) 2026 the helmlab authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include "helmlab/ode.hpp"
#include "helmlab/potential.hpp"
#include "helmlab/util.hpp"
#include "helmlab/vec.hpp"

namespace helmlab {

// Point of phase space T*R^n.
struct PhasePoint {
  Vec x;
  Vec xi;

  PhasePoint() = default;
  PhasePoint(Vec x_, Vec xi_) : x(std::move(x_)), xi(std::move(xi_)) {}
  int dim() const { return x.dim(); }
  bool finite() const { return x.finite() && xi.finite(); }
};

inline double phase_dist(const PhasePoint& a, const PhasePoint& b) {
  return std::sqrt((a.x - b.x).norm2() + (a.xi - b.xi).norm2());
}

/// p(x,xi) = |xi|^2 + V1(x), the classical symbol driving the rays.
inline double eval_hamiltonian(const PotentialPair& pot, const PhasePoint& w) {
  return w.xi.norm2() + pot.v1(w.x);
}

// Sampled integral curve of xdot = 2 xi, xidot = -grad V1, together with the
// accumulated absorption integral int_0^t V2(x(s)) ds.
struct Trajectory {
  std::vector<double> times;
  std::vector<PhasePoint> states;
  std::vector<double> damping;
  double energy0 = 0.0;
};

enum class FlowClass { Escaping, MeetsAbsorption, TrappedUndetermined };

inline const char* to_string(FlowClass c) {
  switch (c) {
    case FlowClass::Escaping: return "escaping";
    case FlowClass::MeetsAbsorption: return "meets_absorption";
    default: return "trapped_undetermined";
  }
}

namespace detail {

// state layout: [x(n), xi(n), damping]
inline void pack(const PhasePoint& w, double damping, std::vector<double>& y) {
  const int n = w.dim();
  y.resize(2 * n + 1);
  for (int i = 0; i < n; ++i) y[i] = w.x[i];
  for (int i = 0; i < n; ++i) y[n + i] = w.xi[i];
  y[2 * n] = damping;
}

inline PhasePoint unpack(const std::vector<double>& y, int n) {
  PhasePoint w{Vec(n), Vec(n)};
  for (int i = 0; i < n; ++i) w.x[i] = y[i];
  for (int i = 0; i < n; ++i) w.xi[i] = y[n + i];
  return w;
}

inline DormandPrince::Rhs hamiltonian_rhs(const PotentialPair& pot) {
  const int n = pot.dim();
  return [&pot, n](double, const std::vector<double>& y, std::vector<double>& dydt) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = y[i];
    const Vec g = pot.grad_v1(x);
    dydt.resize(2 * n + 1);
    for (int i = 0; i < n; ++i) dydt[i] = 2.0 * y[n + i];
    for (int i = 0; i < n; ++i) dydt[n + i] = -g[i];
    dydt[2 * n] = pot.v2(x);
  };
}

}  // namespace detail

/// Hamiltonian flow phi^t(w0); t may be negative.
inline PhasePoint flow(const PotentialPair& pot, const PhasePoint& w0, double t, double tol = 1e-10,
                       double max_step = 0.1) {
  if (tol <= 0) throw ConfigError("flow: tol must be positive");
  if (t == 0.0) return w0;
  DormandPrince::Options opt;
  opt.rel_tol = opt.abs_tol = tol;
  opt.max_step = max_step;
  DormandPrince stepper(opt);
  std::vector<double> y;
  detail::pack(w0, 0.0, y);
  stepper.integrate(detail::hamiltonian_rhs(pot), 0.0, t, y);
  return detail::unpack(y, pot.dim());
}

/// Flow with the damping integral tracked; samples at accepted steps.
inline Trajectory flow_trajectory(const PotentialPair& pot, const PhasePoint& w0, double t_final,
                                  double tol = 1e-10, double max_step = 0.1) {
  DormandPrince::Options opt;
  opt.rel_tol = opt.abs_tol = tol;
  opt.max_step = max_step;
  DormandPrince stepper(opt);
  const int n = pot.dim();

  Trajectory traj;
  traj.energy0 = eval_hamiltonian(pot, w0);
  traj.times.push_back(0.0);
  traj.states.push_back(w0);
  traj.damping.push_back(0.0);

  std::vector<double> y;
  detail::pack(w0, 0.0, y);
  stepper.integrate(detail::hamiltonian_rhs(pot), 0.0, t_final, y,
                    [&](double t, const std::vector<double>& s) {
                      traj.times.push_back(t);
                      traj.states.push_back(detail::unpack(s, n));
                      traj.damping.push_back(s[2 * n]);
                    });
  return traj;
}

/// int_0^t V2(x(s, w0)) ds, computed by augmenting the flow state.
inline double damping_integral(const PotentialPair& pot, const PhasePoint& w0, double t,
                               double tol = 1e-10, double max_step = 0.1) {
  if (t < 0) throw ConfigError("damping_integral: t must be nonnegative");
  if (t == 0.0) return 0.0;
  DormandPrince::Options opt;
  opt.rel_tol = opt.abs_tol = tol;
  opt.max_step = max_step;
  DormandPrince stepper(opt);
  std::vector<double> y;
  detail::pack(w0, 0.0, y);
  stepper.integrate(detail::hamiltonian_rhs(pot), 0.0, t, y);
  return std::max(0.0, y[2 * pot.dim()]);
}

/// exp(-2 t Im(e1) - 2 int_0^t V2 o flow), the absorption factor along a ray.
inline double damping_weight(const PotentialPair& pot, const PhasePoint& w0, double t,
                             std::complex<double> e1, double tol = 1e-10) {
  if (e1.imag() < 0) throw ConfigError("damping_weight: Im e1 must be nonnegative");
  return std::exp(-2.0 * t * e1.imag() - 2.0 * damping_integral(pot, w0, t, tol));
}

struct ClassifyOptions {
  double tol = 1e-9;
  double max_step = 0.05;  // bounds the event-detection stride
};

/// First of: leaves |x| > r_escape moving outward (Escaping), or enters
/// {V2 > gamma} (MeetsAbsorption); TrappedUndetermined if neither by t_max.
inline FlowClass classify_trajectory(const PotentialPair& pot, const PhasePoint& w0, double t_max,
                                     double r_escape, double gamma, ClassifyOptions copt = {}) {
  if (t_max <= 0 || gamma <= 0) throw ConfigError("classify_trajectory: t_max and gamma must be positive");
  if (r_escape < pot.v1_field().support_radius(1e-10))
    throw ConfigError("classify_trajectory: r_escape must exceed the decay radius of V1");

  FlowClass result = FlowClass::TrappedUndetermined;
  auto probe = [&](const PhasePoint& w) -> bool {
    if (pot.v2(w.x) > gamma) {
      result = FlowClass::MeetsAbsorption;
      return true;
    }
    if (w.x.norm() > r_escape && dot(w.x, w.xi) > 0.0) {
      result = FlowClass::Escaping;
      return true;
    }
    return false;
  };

  if (probe(w0)) return result;

  DormandPrince::Options opt;
  opt.rel_tol = opt.abs_tol = copt.tol;
  opt.max_step = copt.max_step;
  DormandPrince stepper(opt);
  std::vector<double> y;
  detail::pack(w0, 0.0, y);
  const int n = pot.dim();
  bool done = false;
  try {
    stepper.integrate(detail::hamiltonian_rhs(pot), 0.0, t_max, y,
                      [&](double, const std::vector<double>& s) {
                        if (done) return;
                        if (probe(detail::unpack(s, n))) done = true;
                      });
  } catch (const NumericalError&) {
    if (!done) throw;
  }
  return result;
}

struct ShellSamplerConfig {
  double box_halfwidth = 5.0;  // x sampled uniformly in [-b, b]^n
  int samples = 100;
  double t_max = 50.0;
  double r_escape = 20.0;
  double gamma = 1e-3;
  std::uint64_t seed = 1;
  int max_rejects = 100000;
};

/// Uniform-in-x rejection sampler on the energy shell p = e0: accepts x with
/// V1(x) < e0 and draws |xi| = sqrt(e0 - V1(x)) with uniform direction.
inline std::vector<PhasePoint> sample_energy_shell(const PotentialPair& pot, double e0,
                                                   const ShellSamplerConfig& cfg) {
  Rng rng(cfg.seed);
  const int n = pot.dim();
  std::vector<PhasePoint> out;
  out.reserve(static_cast<std::size_t>(cfg.samples));
  int rejects = 0;
  while (static_cast<int>(out.size()) < cfg.samples) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = rng.uniform(-cfg.box_halfwidth, cfg.box_halfwidth);
    const double gap = e0 - pot.v1(x);
    if (gap <= 0.0) {
      if (++rejects > cfg.max_rejects)
        throw NumericalError("sample_energy_shell: empty energy shell over the sampling box");
      continue;
    }
    Vec dir(n);
    if (n == 1) {
      dir[0] = (rng.uniform() < 0.5) ? -1.0 : 1.0;
    } else {
      double r = 0.0;
      while (r < 1e-12) {
        for (int i = 0; i < n; ++i) dir[i] = rng.normal();
        r = dir.norm();
      }
      dir *= 1.0 / r;
    }
    out.emplace_back(x, std::sqrt(gap) * dir);
  }
  return out;
}

struct AbsorptionReport {
  double pass_fraction = 0.0;
  int samples = 0;
  std::vector<PhasePoint> witnesses;  // undetermined in both time directions
};

/// Samples the shell p = e0 and classifies each point in both time
/// directions. A sample passes when some direction escapes or meets
/// absorption. Reports the pass fraction and the failing witnesses; this is
/// a sampler, never a proof that the hypothesis holds.
inline AbsorptionReport check_absorption_hypothesis(const PotentialPair& pot, double e0,
                                                    const ShellSamplerConfig& cfg) {
  AbsorptionReport rep;
  const auto ws = sample_energy_shell(pot, e0, cfg);
  rep.samples = static_cast<int>(ws.size());
  int pass = 0;
  for (const auto& w : ws) {
    const FlowClass fwd = classify_trajectory(pot, w, cfg.t_max, cfg.r_escape, cfg.gamma);
    bool ok = fwd != FlowClass::TrappedUndetermined;
    if (!ok) {
      // time reversal: phi^{-t}(x, xi) = R(phi^t(R(x, xi))), R(x,xi) = (x,-xi)
      const FlowClass bwd =
          classify_trajectory(pot, PhasePoint(w.x, -w.xi), cfg.t_max, cfg.r_escape, cfg.gamma);
      ok = bwd != FlowClass::TrappedUndetermined;
    }
    if (ok)
      ++pass;
    else
      rep.witnesses.push_back(w);
  }
  rep.pass_fraction = rep.samples ? static_cast<double>(pass) / rep.samples : 1.0;
  return rep;
}

struct DampingFit {
  double c = 1.0;      // envelope constant
  double delta = 0.0;  // fitted exponential rate, > 0 when absorption acts
  double envelope_residual = 0.0;  // max_t |D(t) - (delta t + b)| / D(t_max)
  bool hypothesis_violated = false;  // delta <= 0
};

/// Least-squares envelope exp(-int_0^t V2) <= C exp(-delta t) along one
/// trapped trajectory. Inputs that never meet the absorption region come out
/// with delta <= 0 and are flagged rather than silently accepted.
inline DampingFit fit_damping_decay(const PotentialPair& pot, const PhasePoint& w0, double t_max,
                                    double tol = 1e-10) {
  const Trajectory traj = flow_trajectory(pot, w0, t_max, tol, 0.02);
  std::vector<double> ts, ds;
  ts.reserve(traj.times.size());
  ds.reserve(traj.times.size());
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    ts.push_back(traj.times[i]);
    ds.push_back(traj.damping[i]);
  }
  const LineFit lf = fit_line(ts, ds);
  DampingFit fit;
  fit.delta = lf.slope;
  fit.c = std::exp(-lf.intercept);
  const double total = ds.back();
  fit.envelope_residual = (total > 0.0) ? lf.max_residual / total : lf.max_residual;
  fit.hypothesis_violated = !(fit.delta > 0.0);
  return fit;
}

}  // namespace helmlab
