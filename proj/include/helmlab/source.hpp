// Copyright (c) 2026 the helmlab authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "helmlab/flow.hpp"
#include "helmlab/grid.hpp"
#include "helmlab/potential.hpp"
#include "helmlab/quadrature.hpp"
#include "helmlab/util.hpp"
#include "helmlab/vec.hpp"

namespace helmlab {

// Schwartz profile of the source layer. Only even real Gaussians ship, so the
// Fourier transform is real and S_hat(xi)^2 = |S_hat(xi)|^2 unambiguously.
struct Profile {
  double scale = 1.0;
  double width = 1.0;
  int dim = 1;

  double value(const Vec& y) const {
    return scale * std::exp(-y.norm2() / (2.0 * width * width));
  }
  // S_hat(xi) = int e^{-i<y,xi>} S(y) dy
  double fourier(const Vec& xi) const {
    const double pref = scale * std::pow(2.0 * kPi, 0.5 * dim) * std::pow(width, dim);
    return pref * std::exp(-0.5 * width * width * xi.norm2());
  }
  // |y| beyond which S is below `tail` of its peak.
  double support_radius(double tail = 1e-16) const {
    return width * std::sqrt(-2.0 * std::log(tail));
  }
};

// Source submanifolds. `Sphere` is reserved for n = 3 and rejected by every
// operation in v1.
enum class ManifoldKind { Point, Circle, Segment, Sphere };

struct AmplitudeSpec {
  double constant = 1.0;
  // Optional smooth angular modulation for circles: a * exp(kappa (cos(theta - theta0) - 1)).
  double von_mises_kappa = 0.0;
  double von_mises_theta0 = 0.0;
};

class SourceManifold {
public:
  static SourceManifold point(const Vec& z, double amplitude = 1.0) {
    SourceManifold m;
    m.kind_ = ManifoldKind::Point;
    m.n_ = z.dim();
    m.d_ = 0;
    m.p0_ = z;
    m.amp_.constant = amplitude;
    return m;
  }

  static SourceManifold circle(const Vec& center, double radius, AmplitudeSpec amp = {}) {
    if (center.dim() != 2) throw ConfigError("SourceManifold::circle: n = 2 only");
    if (radius <= 0) throw ConfigError("SourceManifold::circle: radius must be positive");
    SourceManifold m;
    m.kind_ = ManifoldKind::Circle;
    m.n_ = 2;
    m.d_ = 1;
    m.p0_ = center;
    m.radius_ = radius;
    m.amp_ = amp;
    return m;
  }

  // Open segment; the amplitude carries a C^2 cutoff vanishing at both ends.
  static SourceManifold segment(const Vec& a, const Vec& b, double amplitude = 1.0,
                                double cutoff_fraction = 0.2) {
    if (a.dim() != 2 || b.dim() != 2) throw ConfigError("SourceManifold::segment: n = 2 only");
    if ((b - a).norm() <= 0) throw ConfigError("SourceManifold::segment: degenerate endpoints");
    if (!(cutoff_fraction > 0 && cutoff_fraction < 0.5))
      throw ConfigError("SourceManifold::segment: cutoff_fraction in (0, 0.5)");
    SourceManifold m;
    m.kind_ = ManifoldKind::Segment;
    m.n_ = 2;
    m.d_ = 1;
    m.p0_ = a;
    m.p1_ = b;
    m.amp_.constant = amplitude;
    m.cutoff_ = cutoff_fraction;
    return m;
  }

  ManifoldKind kind() const { return kind_; }
  int ambient_dim() const { return n_; }
  int intrinsic_dim() const { return d_; }
  double radius() const { return radius_; }
  const Vec& anchor() const { return p0_; }

  // chart parameter u in [0,1); circles wrap, segments clamp
  Vec chart_point(double u) const {
    switch (kind_) {
      case ManifoldKind::Point: return p0_;
      case ManifoldKind::Circle: {
        const double th = 2.0 * kPi * u;
        return Vec{p0_[0] + radius_ * std::cos(th), p0_[1] + radius_ * std::sin(th)};
      }
      case ManifoldKind::Segment: return p0_ + u * (p1_ - p0_);
      default: throw ConfigError("SourceManifold: sphere sources are reserved, unimplemented");
    }
  }

  Vec chart_tangent(double u) const {
    switch (kind_) {
      case ManifoldKind::Point: return Vec::zero(n_);
      case ManifoldKind::Circle: {
        const double th = 2.0 * kPi * u;
        return Vec{-2.0 * kPi * radius_ * std::sin(th), 2.0 * kPi * radius_ * std::cos(th)};
      }
      case ManifoldKind::Segment: return p1_ - p0_;
      default: throw ConfigError("SourceManifold: sphere sources are reserved, unimplemented");
    }
  }

  // Unit normals at chart point (codimension-one kinds only).
  Vec unit_normal(double u) const {
    switch (kind_) {
      case ManifoldKind::Circle: {
        const double th = 2.0 * kPi * u;
        return Vec{std::cos(th), std::sin(th)};
      }
      case ManifoldKind::Segment: {
        const Vec t = normalized(p1_ - p0_);
        return Vec{-t[1], t[0]};
      }
      default: throw ConfigError("SourceManifold: no distinguished normal for this kind");
    }
  }

  double amplitude(double u) const {
    switch (kind_) {
      case ManifoldKind::Point: return amp_.constant;
      case ManifoldKind::Circle: {
        if (amp_.von_mises_kappa == 0.0) return amp_.constant;
        const double th = 2.0 * kPi * u;
        return amp_.constant *
               std::exp(amp_.von_mises_kappa * (std::cos(th - amp_.von_mises_theta0) - 1.0));
      }
      case ManifoldKind::Segment: {
        // C^2 quintic ramps force supp A to stay inside the open segment.
        const double w = cutoff_;
        double ramp = 1.0;
        if (u < w) ramp = 1.0 - detail::smoothfall(u / w);
        else if (u > 1.0 - w) ramp = 1.0 - detail::smoothfall((1.0 - u) / w);
        if (u <= 0.0 || u >= 1.0) ramp = 0.0;
        return amp_.constant * ramp;
      }
      default: throw ConfigError("SourceManifold: sphere sources are reserved, unimplemented");
    }
  }

  // Euclidean distance to the manifold.
  double distance(const Vec& x) const {
    switch (kind_) {
      case ManifoldKind::Point: return (x - p0_).norm();
      case ManifoldKind::Circle: return std::abs((x - p0_).norm() - radius_);
      case ManifoldKind::Segment: {
        const Vec d = p1_ - p0_;
        const double u = std::clamp(dot(x - p0_, d) / d.norm2(), 0.0, 1.0);
        return (x - (p0_ + u * d)).norm();
      }
      default: throw ConfigError("SourceManifold: sphere sources are reserved, unimplemented");
    }
  }

  // Chart parameter of the spatially nearest manifold point.
  double nearest_chart(const Vec& x) const {
    switch (kind_) {
      case ManifoldKind::Point: return 0.0;
      case ManifoldKind::Circle: {
        const double th = std::atan2(x[1] - p0_[1], x[0] - p0_[0]);
        double u = th / (2.0 * kPi);
        if (u < 0) u += 1.0;
        return u;
      }
      case ManifoldKind::Segment: {
        const Vec d = p1_ - p0_;
        return std::clamp(dot(x - p0_, d) / d.norm2(), 0.0, 1.0);
      }
      default: throw ConfigError("SourceManifold: sphere sources are reserved, unimplemented");
    }
  }

  double bounding_radius() const {
    switch (kind_) {
      case ManifoldKind::Point: return p0_.norm();
      case ManifoldKind::Circle: return p0_.norm() + radius_;
      case ManifoldKind::Segment: return std::max(p0_.norm(), p1_.norm());
      default: throw ConfigError("SourceManifold: sphere sources are reserved, unimplemented");
    }
  }

  // Geodesic step from chart point u in charted direction zeta (scalar for
  // d = 1): circles follow the arc, segments the line.
  Vec exp_map(double u, double zeta) const {
    switch (kind_) {
      case ManifoldKind::Circle: return chart_point(u + zeta / (2.0 * kPi * radius_));
      case ManifoldKind::Segment: return chart_point(u + zeta / (p1_ - p0_).norm());
      default: throw ConfigError("SourceManifold::exp_map: d = 1 kinds only");
    }
  }

private:
  ManifoldKind kind_ = ManifoldKind::Point;
  int n_ = 1;
  int d_ = 0;
  Vec p0_;
  Vec p1_;
  double radius_ = 0.0;
  AmplitudeSpec amp_;
  double cutoff_ = 0.2;
};

// Point of the energy-shell normal bundle, with cached amplitude.
struct NormalBundlePoint {
  Vec z;
  Vec xi;
  int branch = 0;    // +-normal index, or angle index on a momentum circle
  double chart_u = 0.0;
  double amp = 1.0;  // A(z)
};

struct NormalBundleQuadrature {
  std::vector<NormalBundlePoint> nodes;
  std::vector<double> weights;

  double total() const { return pairwise_sum(weights); }

  // Orthogonality and shell residuals (<= 1e-10 by construction).
  double max_residual(const SourceManifold& m, const PotentialPair& pot, double e0) const {
    double r = 0.0;
    for (const auto& nd : nodes) {
      const double gap = e0 - pot.v1(nd.z);
      r = std::max(r, std::abs(nd.xi.norm2() - gap));
      if (m.intrinsic_dim() == 1) {
        const Vec tau = normalized(m.chart_tangent(nd.chart_u));
        r = std::max(r, std::abs(dot(nd.xi, tau)));
      }
    }
    return r;
  }
};

namespace detail {

inline double fiber_radius(const PotentialPair& pot, double e0, const Vec& z) {
  const double gap = e0 - pot.v1(z);
  if (gap <= 0.0)
    throw NumericalError("normal_energy_fiber: empty fiber, e0 <= V1(z) on the manifold");
  return std::sqrt(gap);
}

// sqrt(det g) of a d=1 chart u -> (z(u), xi(u)): the metric keeps <Z,Z> plus
// the part of Xi orthogonal to T_z(Gamma) + R xi.
inline double sigma_density(const SourceManifold& m, const Vec& dz, const Vec& xi, const Vec& dxi) {
  Vec perp = dxi;
  if (dz.norm2() > 0) {
    const Vec tau = normalized(dz);
    perp -= dot(perp, tau) * tau;
  }
  if (xi.norm2() > 0) {
    const Vec xh = normalized(xi);
    perp -= dot(perp, xh) * xh;
  }
  return std::sqrt(dz.norm2() + perp.norm2());
}

}  // namespace detail

/// Fiber of N_E(Gamma) over z: two opposite normals for d = n-1, a sampled
/// momentum sphere for d = 0 in n = 2 (sample count = `sphere_samples`).
inline std::vector<NormalBundlePoint> normal_energy_fiber(const SourceManifold& m,
                                                          const PotentialPair& pot, double e0,
                                                          const Vec& z, int sphere_samples = 16) {
  const double r = detail::fiber_radius(pot, e0, z);
  std::vector<NormalBundlePoint> out;
  const double u = m.nearest_chart(z);
  const double a = m.amplitude(u);
  if (m.intrinsic_dim() == m.ambient_dim() - 1) {
    Vec nrm;
    if (m.ambient_dim() == 1) {
      nrm = Vec{1.0};
    } else {
      nrm = m.unit_normal(u);
    }
    out.push_back({z, r * nrm, 0, u, a});
    out.push_back({z, -1.0 * r * nrm, 1, u, a});
  } else if (m.intrinsic_dim() == 0 && m.ambient_dim() == 2) {
    for (int j = 0; j < sphere_samples; ++j) {
      const double th = 2.0 * kPi * (j + 0.5) / sphere_samples;
      out.push_back({z, Vec{r * std::cos(th), r * std::sin(th)}, j, u, a});
    }
  } else {
    throw ConfigError("normal_energy_fiber: unsupported (d, n) combination in v1");
  }
  return out;
}

/// Quadrature realizing the canonical measure sigma-tilde on N_E(Gamma).
/// `refinement` = nodes per branch (d = 1) or per momentum circle (d = 0,
/// n = 2). Point sources in R^1 carry the counting measure, weight 1 each.
inline NormalBundleQuadrature sigma_quadrature(const SourceManifold& m, const PotentialPair& pot,
                                               double e0, int refinement = 64) {
  NormalBundleQuadrature q;
  const int n = m.ambient_dim(), d = m.intrinsic_dim();

  if (m.kind() == ManifoldKind::Point && n == 1) {
    const Vec z = m.anchor();
    const double r = detail::fiber_radius(pot, e0, z);
    q.nodes.push_back({z, Vec{r}, 0, 0.0, m.amplitude(0.0)});
    q.nodes.push_back({z, Vec{-r}, 1, 0.0, m.amplitude(0.0)});
    q.weights = {1.0, 1.0};
    return q;
  }

  if (m.kind() == ManifoldKind::Point && n == 2) {
    // momentum circle with the round metric of radius |xi|
    const Vec z = m.anchor();
    const double r = detail::fiber_radius(pot, e0, z);
    const double a = m.amplitude(0.0);
    const double w = 2.0 * kPi / refinement * r;
    for (int j = 0; j < refinement; ++j) {
      const double th = 2.0 * kPi * (j + 0.5) / refinement;
      q.nodes.push_back({z, Vec{r * std::cos(th), r * std::sin(th)}, j, 0.0, a});
      q.weights.push_back(w);
    }
    return q;
  }

  if (d == 1 && n == 2) {
    const bool periodic = m.kind() == ManifoldKind::Circle;
    for (int branch = 0; branch < 2; ++branch) {
      const double sgn = branch == 0 ? 1.0 : -1.0;
      auto push_node = [&](double u, double wu) {
        const Vec z = m.chart_point(u);
        const Vec dz = m.chart_tangent(u);
        const double r = detail::fiber_radius(pot, e0, z);
        const Vec nrm = m.unit_normal(u);
        const Vec xi = sgn * r * nrm;
        // d xi / d u, closed form: r'(u) nrm + r dnrm/du
        const double rp = -dot(pot.grad_v1(z), dz) / (2.0 * r);
        Vec dn(2);
        if (m.kind() == ManifoldKind::Circle) {
          const double th = 2.0 * kPi * u;
          dn = Vec{-2.0 * kPi * std::sin(th), 2.0 * kPi * std::cos(th)};
        } else {
          dn = Vec::zero(2);
        }
        const Vec dxi = sgn * (rp * nrm + r * dn);
        const double dens = detail::sigma_density(m, dz, xi, dxi);
        q.nodes.push_back({z, xi, branch, u, m.amplitude(u)});
        q.weights.push_back(wu * dens);
      };
      if (periodic) {
        for (int j = 0; j < refinement; ++j) push_node((j + 0.5) / refinement, 1.0 / refinement);
      } else {
        const int panels = std::max(1, refinement / 8);
        const GaussRule rule = gauss_legendre(8);
        for (int p = 0; p < panels; ++p) {
          const double lo = static_cast<double>(p) / panels, w = 1.0 / panels;
          for (int i = 0; i < 8; ++i)
            push_node(lo + 0.5 * w * (rule.nodes[i] + 1.0), 0.5 * w * rule.weights[i]);
        }
      }
    }
    return q;
  }

  throw ConfigError("sigma_quadrature: unsupported manifold/(d,n) in v1");
}

/// S_h(x) = h^{(1-n-d)/2} int_Gamma A(z) S((x-z)/h) dsigma(z), sampled on the
/// grid. Rejects grids with dx > h/4.
inline DiscreteField synthesize_source(const SourceManifold& m, const Profile& profile, double h,
                                       const Grid& grid) {
  grid.require_resolves(h);
  if (profile.dim != m.ambient_dim() || grid.dim() != m.ambient_dim())
    throw ConfigError("synthesize_source: dimension mismatch");
  const int n = m.ambient_dim(), d = m.intrinsic_dim();
  const double pref = std::pow(h, 0.5 * (1.0 - n - d));
  DiscreteField out(grid, h);
  const double cut = profile.support_radius(1e-16) * h;

  if (m.kind() == ManifoldKind::Point) {
    const Vec z = m.anchor();
    const double a = m.amplitude(0.0);
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      const Vec y = (1.0 / h) * (grid.point(i) - z);
      out.values[i] = pref * a * profile.value(y);
    }
    return out;
  }

  if (d == 1 && n == 2) {
    const double speed = m.chart_tangent(0.0).norm();  // constant for circle/segment
    const double node_du = profile.width * h / (3.0 * speed);
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      const Vec x = grid.point(i);
      const double base = m.distance(x);
      if (base > cut) continue;
      // chart window covering |x - z(u)| <= cut
      double u0 = m.nearest_chart(x), du = 0.0;
      if (m.kind() == ManifoldKind::Circle) {
        const double rho = (x - m.anchor()).norm();
        const double r = m.radius();
        if (rho < 1e-12) {
          du = 0.5;  // whole circle (degenerate center; cut >= r required to get here)
        } else {
          const double c = (rho * rho + r * r - cut * cut) / (2.0 * rho * r);
          du = (c <= -1.0) ? 0.5 : std::acos(std::min(1.0, c)) / (2.0 * kPi);
        }
      } else {
        const double half = std::sqrt(std::max(0.0, cut * cut - base * base));
        du = half / speed;
      }
      double lo = u0 - du, hi = u0 + du;
      if (m.kind() == ManifoldKind::Segment) {
        lo = std::max(lo, 0.0);
        hi = std::min(hi, 1.0);
        if (hi <= lo) continue;
      }
      const int panels = std::max(2, static_cast<int>(std::ceil((hi - lo) / node_du)));
      const double val = integrate_gl(
          [&](double u) {
            const Vec y = (1.0 / h) * (x - m.chart_point(u));
            return m.amplitude(u) * profile.value(y) * m.chart_tangent(u).norm();
          },
          lo, hi, panels);
      out.values[i] = pref * val;
    }
    return out;
  }

  throw ConfigError("synthesize_source: unsupported manifold in v1");
}

struct NormFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares slope of log ||S_h||_{L^2,delta} against log h.
inline NormFit weighted_norm_fit(const SourceManifold& m, const Profile& profile, double delta,
                                 const std::vector<double>& h_list) {
  if (h_list.size() < 4) throw ConfigError("weighted_norm_fit: need at least 4 h values");
  const double half_extent = m.bounding_radius() + 0.75;
  std::vector<double> lx, ly;
  for (double h : h_list) {
    const Grid g = Grid::for_wavelength(m.ambient_dim(), half_extent, h);
    const DiscreteField sh = synthesize_source(m, profile, h, g);
    lx.push_back(std::log(h));
    ly.push_back(std::log(weighted_norm(sh, delta)));
  }
  const LineFit f = fit_line(lx, ly);
  return {f.slope, f.intercept};
}

// --- tubular neighbourhood of Gamma --------------------------------------

struct TubeParameters {
  double t_max = 0.0;   // largest validated dyadic time, <= 0.5
  double gamma_m = 0.0; // d(x(t), Gamma) >= 2 gamma_m t on the test lattice
  double gamma_M = 0.0;
  bool injective = false;
};

/// Fits the tube horizon: the largest dyadic t_max <= 0.5 such that the
/// sampled tube map stays injective and the distance sandwich
/// 2 gamma_m t <= d(x(t), Gamma) <= 2 gamma_M t holds with gamma_m bounded
/// away from zero.
inline TubeParameters fit_tube_parameters(const SourceManifold& m, const PotentialPair& pot,
                                          double e0, int time_samples = 12, int node_refinement = 24) {
  const NormalBundleQuadrature q = sigma_quadrature(m, pot, e0, node_refinement);
  double xi_min = 1e300;
  for (const auto& nd : q.nodes) xi_min = std::min(xi_min, nd.xi.norm());

  for (double t_max = 0.5; t_max >= 1.0 / 64.0; t_max *= 0.5) {
    double gm = 1e300, gM = 0.0;
    bool ok = true;
    std::vector<Vec> images;
    images.reserve(q.nodes.size() * static_cast<std::size_t>(time_samples));
    for (const auto& nd : q.nodes) {
      PhasePoint w(nd.z, nd.xi);
      double t_prev = 0.0;
      std::vector<double> y;
      detail::pack(w, 0.0, y);
      DormandPrince stepper([] {
        DormandPrince::Options o;
        o.rel_tol = o.abs_tol = 1e-10;
        o.max_step = 0.05;
        return o;
      }());
      const auto rhs = detail::hamiltonian_rhs(pot);
      for (int k = 1; k <= time_samples; ++k) {
        const double t = t_max * k / time_samples;
        stepper.integrate(rhs, t_prev, t, y);
        t_prev = t;
        const PhasePoint wt = detail::unpack(y, pot.dim());
        const double ratio = m.distance(wt.x) / (2.0 * t);
        gm = std::min(gm, ratio);
        gM = std::max(gM, ratio);
        images.push_back(wt.x);
      }
    }
    // sampled injectivity: distinct lattice nodes must map to distinct points
    double min_gap = 1e300;
    for (std::size_t i = 0; i < images.size() && ok; ++i)
      for (std::size_t j = i + 1; j < images.size(); ++j) {
        const double gap = (images[i] - images[j]).norm();
        if (gap < 1e-9) {
          ok = false;
          break;
        }
        min_gap = std::min(min_gap, gap);
      }
    if (ok && gm >= 0.1 * xi_min && gM < 1e300)
      return {t_max, gm, gM, true};
  }
  throw NumericalError("fit_tube_parameters: no dyadic horizon validated");
}

struct TubularCheck {
  double lhs = 0.0;     // int f dx
  double rhs = 0.0;     // 2^{n-d} int int f(x(t,z,xi)) t^{n-d-1} |xi| dsigma dt
  double relerr = 0.0;
};

/// Change-of-variables check for the tube map. f must be a spatial bump
/// supported inside the tube image; the identity holds up to O(t_max).
inline TubularCheck verify_tubular_change_of_variables(const SourceManifold& m,
                                                       const PotentialPair& pot, double e0,
                                                       const ScalarField& f, double t_max,
                                                       int refinement = 128) {
  const int n = m.ambient_dim(), d = m.intrinsic_dim();
  // effective support of f and the leak check
  double sup_rad = 0.0;
  Vec f_center = Vec::zero(n);
  if (!f.gaussians().empty()) {
    f_center = f.gaussians().front().center;
    for (const auto& g : f.gaussians())
      sup_rad = std::max(sup_rad, (g.center - f_center).norm() + 7.0 * g.width);
  }
  const TubeParameters tube = fit_tube_parameters(m, pot, e0);
  const double d_near = std::max(0.0, m.distance(f_center) - sup_rad);
  const double d_far = m.distance(f_center) + sup_rad;
  if (d_near <= 1e-9 || d_far >= 2.0 * tube.gamma_m * t_max)
    throw ConfigError("verify_tubular_change_of_variables: support leaks outside the tube");

  // lhs: tensor quadrature over the bounding box of supp f
  double lhs = 0.0;
  if (n == 1) {
    lhs = integrate_adaptive([&](double x) { return f.value(Vec{x}); }, f_center[0] - sup_rad,
                             f_center[0] + sup_rad, 1e-12);
  } else {
    const int panels = 64;
    lhs = integrate_gl(
        [&](double x0) {
          return integrate_gl([&](double x1) { return f.value(Vec{x0, x1}); },
                              f_center[1] - sup_rad, f_center[1] + sup_rad, panels);
        },
        f_center[0] - sup_rad, f_center[0] + sup_rad, panels);
  }

  // rhs: flow each sigma node through Gauss-Legendre times
  const NormalBundleQuadrature q = sigma_quadrature(m, pot, e0, refinement);
  const int t_panels = std::max(16, static_cast<int>(std::ceil(t_max / 0.01)));
  const GaussRule rule = gauss_legendre(8);
  std::vector<double> contrib(q.nodes.size());
  for (std::size_t j = 0; j < q.nodes.size(); ++j) {
    const auto& nd = q.nodes[j];
    std::vector<double> y;
    detail::pack(PhasePoint(nd.z, nd.xi), 0.0, y);
    DormandPrince stepper([] {
      DormandPrince::Options o;
      o.rel_tol = o.abs_tol = 1e-11;
      o.max_step = 0.05;
      return o;
    }());
    const auto rhs_fn = detail::hamiltonian_rhs(pot);
    double t_prev = 0.0, acc = 0.0;
    const double wpanel = t_max / t_panels;
    for (int p = 0; p < t_panels; ++p) {
      for (int i = 0; i < 8; ++i) {
        const double t = wpanel * (p + 0.5 * (rule.nodes[i] + 1.0));
        stepper.integrate(rhs_fn, t_prev, t, y);
        t_prev = t;
        const PhasePoint wt = detail::unpack(y, pot.dim());
        acc += 0.5 * wpanel * rule.weights[i] * f.value(wt.x) * std::pow(t, n - d - 1) *
               nd.xi.norm();
      }
    }
    contrib[j] = q.weights[j] * acc;
  }
  const double rhs = std::pow(2.0, n - d) * pairwise_sum(contrib);
  const double relerr = std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300);
  return {lhs, rhs, relerr};
}

// --- return-set heuristic (hyp4) ------------------------------------------

// Phase-space distance proxy to N_E(Gamma): spatially nearest manifold point,
// then the nearest fiber momentum there.
inline double phase_distance_to_bundle(const SourceManifold& m, const PotentialPair& pot, double e0,
                                       const PhasePoint& w) {
  const double u = m.nearest_chart(w.x);
  const Vec z = m.chart_point(u);
  const double dx2 = (w.x - z).norm2();
  const double gap = e0 - pot.v1(z);
  if (gap <= 0.0) return std::sqrt(dx2 + w.xi.norm2());
  const double r = std::sqrt(gap);
  double dxi2;
  if (m.intrinsic_dim() == 0 && m.ambient_dim() >= 2) {
    dxi2 = sq(w.xi.norm() - r);
  } else if (m.ambient_dim() == 1) {
    dxi2 = std::min(sq(w.xi[0] - r), sq(w.xi[0] + r));
  } else {
    const Vec nrm = m.unit_normal(u);
    dxi2 = std::min((w.xi - r * nrm).norm2(), (w.xi + r * nrm).norm2());
  }
  return std::sqrt(dx2 + dxi2);
}

struct ReturnSetConfig {
  double t_max = 30.0;
  double tube_halfwidth = 1e-2;
  int refinement = 64;
  double tol = 1e-9;
};

/// Fraction of sigma-weighted bundle points whose forward ray re-enters the
/// tube around N_E(Gamma) before t_max. A conservative upper proxy for
/// sigma(Phi_0)/sigma(N_E Gamma); large values flag hyp4 risk for the chosen
/// tube width, they do not prove a violation.
inline double estimate_return_set(const SourceManifold& m, const PotentialPair& pot, double e0,
                                  const ReturnSetConfig& cfg = {}) {
  const NormalBundleQuadrature q = sigma_quadrature(m, pot, e0, cfg.refinement);
  if (q.nodes.empty()) throw ConfigError("estimate_return_set: empty bundle");
  std::vector<double> hits(q.nodes.size(), 0.0);
  for (std::size_t j = 0; j < q.nodes.size(); ++j) {
    const auto& nd = q.nodes[j];
    std::vector<double> y;
    detail::pack(PhasePoint(nd.z, nd.xi), 0.0, y);
    DormandPrince stepper([&] {
      DormandPrince::Options o;
      o.rel_tol = o.abs_tol = cfg.tol;
      o.max_step = 0.25 * cfg.tube_halfwidth;  // cannot jump across the tube
      return o;
    }());
    const auto rhs_fn = detail::hamiltonian_rhs(pot);
    bool left_tube = false, hit = false;
    try {
      stepper.integrate(rhs_fn, 0.0, cfg.t_max, y, [&](double, const std::vector<double>& s) {
        if (hit) return;
        const PhasePoint wt = detail::unpack(s, pot.dim());
        const double dist = phase_distance_to_bundle(m, pot, e0, wt);
        if (!left_tube) {
          if (dist > 2.0 * cfg.tube_halfwidth) left_tube = true;
        } else if (dist <= cfg.tube_halfwidth) {
          hit = true;
        }
      });
    } catch (const NumericalError&) {
      // escape to far field can stiffen the stop condition; treat as no hit
    }
    hits[j] = hit ? q.weights[j] : 0.0;
  }
  return pairwise_sum(hits) / q.total();
}

}  // namespace helmlab
