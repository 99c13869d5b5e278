// Copyright (c) 2026 the helmlab authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <complex>
#include <vector>

#include "helmlab/grid.hpp"
#include "helmlab/potential.hpp"
#include "helmlab/util.hpp"

namespace helmlab {

using SparseOp = Eigen::SparseMatrix<cplx>;

enum class BoundaryMode { Dirichlet, Periodic };

struct SolverConfig {
  // Limiting-absorption shift: +i mu added to E_h. Shift-only mode needs
  // mu > 0 to keep the operator invertible.
  double mu_reg = 0.0;
  bool absorbing_layer = true;  // layer parameters live on the Grid
  double solver_tol = 1e-10;
  BoundaryMode boundary = BoundaryMode::Dirichlet;
};

/// Second-order centered discretization of
///   -h^2 Lap + V1 - i h (V2 + layer) - (E_h + i mu).
inline SparseOp assemble(const PotentialPair& pot, const EnergySpec& e, const Grid& grid,
                         const SolverConfig& cfg) {
  grid.require_resolves(e.h);
  if (!cfg.absorbing_layer && !(cfg.mu_reg > 0.0))
    throw ConfigError("assemble: shift-only mode requires mu_reg > 0");
  const int n = grid.points_per_axis();
  const double h = e.h;
  const double inv_dx2 = 1.0 / sq(grid.spacing());
  const cplx shift = e.eh() + cplx(0.0, cfg.mu_reg);
  const cplx off(-h * h * inv_dx2, 0.0);

  std::vector<Eigen::Triplet<cplx>> trip;
  const std::size_t total = grid.size();
  trip.reserve(total * (grid.dim() == 1 ? 3 : 5));

  auto diag_at = [&](std::size_t idx) {
    const Vec x = grid.point(idx);
    double v2 = pot.v2(x);
    if (cfg.absorbing_layer) v2 += grid.layer_profile(x);
    return cplx(2.0 * grid.dim() * h * h * inv_dx2 + pot.v1(x), -h * v2) - shift;
  };

  if (grid.dim() == 1) {
    for (int i = 0; i < n; ++i) {
      trip.emplace_back(i, i, diag_at(static_cast<std::size_t>(i)));
      const int l = i - 1, r = i + 1;
      if (cfg.boundary == BoundaryMode::Periodic) {
        trip.emplace_back(i, (l + n) % n, off);
        trip.emplace_back(i, r % n, off);
      } else {
        if (l >= 0) trip.emplace_back(i, l, off);
        if (r < n) trip.emplace_back(i, r, off);
      }
    }
  } else {
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const int row = static_cast<int>(grid.index(i, j));
        trip.emplace_back(row, row, diag_at(grid.index(i, j)));
        const auto nb = [&](int ii, int jj) {
          if (cfg.boundary == BoundaryMode::Periodic) {
            trip.emplace_back(row, static_cast<int>(grid.index((ii + n) % n, (jj + n) % n)), off);
          } else if (ii >= 0 && ii < n && jj >= 0 && jj < n) {
            trip.emplace_back(row, static_cast<int>(grid.index(ii, jj)), off);
          }
        };
        nb(i - 1, j);
        nb(i + 1, j);
        nb(i, j - 1);
        nb(i, j + 1);
      }
  }

  SparseOp a(static_cast<int>(total), static_cast<int>(total));
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();
  return a;
}

/// Outgoing solution of (H_h - E_h - i mu) u = S_h by direct sparse
/// factorization. The +i mu shift plus the absorbing layer stand in for the
/// limiting absorption; mu defaults to h^2 when left at zero in layer mode.
inline DiscreteField solve_outgoing(const PotentialPair& pot, const EnergySpec& e,
                                    const DiscreteField& source_field, const Grid& grid,
                                    SolverConfig cfg = {}) {
  if (source_field.grid.size() != grid.size())
    throw ConfigError("solve_outgoing: source field grid mismatch");
  if (grid.size() > 4'000'000)
    throw ConfigError("solve_outgoing: grid exceeds the direct-solver cap (4e6 unknowns)");
  if (cfg.absorbing_layer && cfg.mu_reg <= 0.0) cfg.mu_reg = e.h * e.h;

  const SparseOp a = assemble(pot, e, grid, cfg);
  Eigen::VectorXcd b(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) b[static_cast<Eigen::Index>(i)] = source_field.values[i];

  Eigen::SparseLU<SparseOp, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() != Eigen::Success)
    throw NumericalError("solve_outgoing: sparse factorization failed");
  Eigen::VectorXcd x = lu.solve(b);
  if (lu.info() != Eigen::Success) throw NumericalError("solve_outgoing: back-substitution failed");

  const double bn = b.norm();
  if (bn > 0.0) {
    const double rel = (a * x - b).norm() / bn;
    if (rel > cfg.solver_tol)
      throw NumericalError("solve_outgoing: residual " + std::to_string(rel) +
                           " exceeds solver tolerance");
  }

  DiscreteField u(grid, e.h);
  for (std::size_t i = 0; i < grid.size(); ++i) u.values[i] = x[static_cast<Eigen::Index>(i)];
  return u;
}

/// Free-space outgoing oracle on the line:
///   u(x) = i/(2 h k) int e^{i k |x-y| / h} S_h(y) dy,  k = sqrt(E_h), Im k >= 0.
/// Quadrature over the (compact) support of the source field.
inline DiscreteField analytic_outgoing_1d_free(double e0, double eps, double h,
                                               const DiscreteField& source_field) {
  const Grid& grid = source_field.grid;
  if (grid.dim() != 1) throw ConfigError("analytic_outgoing_1d_free: 1D only");
  const cplx eh(e0, h * eps);
  const cplx k = std::sqrt(eh);  // principal root: Im k >= 0 for Im E_h >= 0
  const cplx pref = cplx(0.0, 1.0) / (2.0 * h * k);
  const double dx = grid.spacing();

  std::vector<std::size_t> supp;
  for (std::size_t j = 0; j < source_field.values.size(); ++j)
    if (std::abs(source_field.values[j]) > 0.0) supp.push_back(j);

  DiscreteField u(grid, h);
  const cplx ik_over_h = cplx(0.0, 1.0) * k / h;
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    const double xi = grid.coord(static_cast<int>(i));
    cplx acc(0.0, 0.0);
    for (std::size_t j : supp) {
      const double yj = grid.coord(static_cast<int>(j));
      acc += std::exp(ik_over_h * std::abs(xi - yj)) * source_field.values[j];
    }
    u.values[i] = pref * acc * dx;
  }
  return u;
}

/// Im <(H_h - E_h) u, u> for the assembled operator (mu = 0); nonpositive for
/// dissipative setups (V2 >= 0, layer folded into V2, Im E_h >= 0).
inline double dissipativity_form(const SparseOp& a_mu0, const std::vector<cplx>& u, double cell_volume) {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(u.size()));
  for (std::size_t i = 0; i < u.size(); ++i) v[static_cast<Eigen::Index>(i)] = u[i];
  const cplx form = (v.adjoint() * (a_mu0 * v))(0, 0) * cell_volume;
  return form.imag();
}

}  // namespace helmlab
