// Copyright (c) 2026 the helmlab authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "helmlab/util.hpp"

namespace helmlab {

// Dormand-Prince 5(4) embedded Runge-Kutta with adaptive step control.
// State is a flat double vector; the RHS writes dy/dt into `dydt`.
//
// Symplectic integration is deliberately not used: runs are damped/truncated
// and energy drift is asserted by the callers rather than assumed.
class DormandPrince {
public:
  struct Options {
    double rel_tol = 1e-10;
    double abs_tol = 1e-10;
    double max_step = 0.1;
    double initial_step = 1e-3;
    // Steps below min_step_factor * |t_span| abort with NumericalError.
    double min_step_factor = 1e-14;
  };

  using Rhs = std::function<void(double t, const std::vector<double>& y, std::vector<double>& dydt)>;

  explicit DormandPrince(Options opt = {}) : opt_(opt) {}

  // Advance y from t0 to t1 (t1 < t0 allowed). Optionally observe accepted
  // steps via `on_step(t, y)`.
  void integrate(const Rhs& rhs, double t0, double t1, std::vector<double>& y,
                 const std::function<void(double, const std::vector<double>&)>& on_step = {}) const {
    if (t0 == t1) return;
    const double dir = (t1 > t0) ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);
    const std::size_t n = y.size();

    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    std::vector<double> ytmp(n), y5(n), err(n);

    double t = t0;
    double hstep = dir * std::min(opt_.initial_step, std::min(opt_.max_step, span));
    rhs(t, y, k1);  // FSAL

    while (dir * (t1 - t) > 0.0) {
      if (std::abs(hstep) > opt_.max_step) hstep = dir * opt_.max_step;
      if (dir * (t + hstep - t1) > 0.0) hstep = t1 - t;
      const double h = hstep;

      auto stage = [&](std::vector<double>& k, double c, std::initializer_list<std::pair<const std::vector<double>*, double>> terms) {
        for (std::size_t i = 0; i < n; ++i) {
          double acc = y[i];
          for (const auto& [kv, a] : terms) acc += h * a * (*kv)[i];
          ytmp[i] = acc;
        }
        rhs(t + c * h, ytmp, k);
      };

      stage(k2, 1.0 / 5.0, {{&k1, 1.0 / 5.0}});
      stage(k3, 3.0 / 10.0, {{&k1, 3.0 / 40.0}, {&k2, 9.0 / 40.0}});
      stage(k4, 4.0 / 5.0, {{&k1, 44.0 / 45.0}, {&k2, -56.0 / 15.0}, {&k3, 32.0 / 9.0}});
      stage(k5, 8.0 / 9.0,
            {{&k1, 19372.0 / 6561.0}, {&k2, -25360.0 / 2187.0}, {&k3, 64448.0 / 6561.0}, {&k4, -212.0 / 729.0}});
      stage(k6, 1.0,
            {{&k1, 9017.0 / 3168.0}, {&k2, -355.0 / 33.0}, {&k3, 46732.0 / 5247.0}, {&k4, 49.0 / 176.0},
             {&k5, -5103.0 / 18656.0}});

      for (std::size_t i = 0; i < n; ++i)
        y5[i] = y[i] + h * (35.0 / 384.0 * k1[i] + 500.0 / 1113.0 * k3[i] + 125.0 / 192.0 * k4[i] -
                            2187.0 / 6784.0 * k5[i] + 11.0 / 84.0 * k6[i]);
      rhs(t + h, y5, k7);

      // 4th-order comparison solution error estimate
      double err_norm = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        err[i] = h * (71.0 / 57600.0 * k1[i] - 71.0 / 16695.0 * k3[i] + 71.0 / 1920.0 * k4[i] -
                      17253.0 / 339200.0 * k5[i] + 22.0 / 525.0 * k6[i] - 1.0 / 40.0 * k7[i]);
        const double sc = opt_.abs_tol + opt_.rel_tol * std::max(std::abs(y[i]), std::abs(y5[i]));
        const double e = err[i] / sc;
        err_norm += e * e;
      }
      err_norm = std::sqrt(err_norm / static_cast<double>(n));

      if (err_norm <= 1.0) {
        t += h;
        y.swap(y5);
        k1.swap(k7);
        if (on_step) on_step(t, y);
      }
      const double safety = 0.9;
      double factor = (err_norm > 0.0) ? safety * std::pow(err_norm, -0.2) : 5.0;
      factor = std::min(5.0, std::max(0.2, factor));
      hstep = h * factor;
      if (std::abs(hstep) < opt_.min_step_factor * span)
        throw NumericalError("DormandPrince: step underflow (stiff or singular right-hand side)");
    }
  }

  const Options& options() const { return opt_; }

private:
  Options opt_;
};

}  // namespace helmlab
