#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "smp/battery.hpp"
#include "smp/errors.hpp"

namespace smp::policies {

// Battery-coupled quadratic program over one horizon:
//
//   minimize    sum_t  lin[t]*y[t] + quad*(y[t] - target[t])^2
//   subject to  lb[t] <= y[t] <= ub[t]
//               stored_t(y) >= 0 for all t
//
// stored_t follows the same recursion as the simulator, where charge in
// excess of the capacity spills. Internally the spill is made an explicit
// nonnegative decision variable: forced spill discards the minimum
// possible energy, so a grid schedule is feasible under the clamped
// dynamics exactly when it is feasible for SOME admissible spill, and the
// reformulated problem
//
//   0 <= stored_t(y, s) <= b_max,  s >= 0
//
// is an equivalent smooth program (linear dynamics for unit efficiencies,
// concave otherwise). It is solved by accelerated projected gradient with
// backtracking inside an augmented-Lagrangian loop; the box constraints
// are handled by exact projection.
struct BatteryQp {
  std::vector<double> x_kw;
  std::vector<double> e_kw;
  double tau_h = 1.0;
  BatterySpec battery;
  std::vector<double> lin;
  double quad = 0.0;
  std::vector<double> target;
  std::vector<double> lb, ub;
  std::vector<double> warm_start;  // optional initial point

  int size() const { return int(x_kw.size()); }
};

struct QpResult {
  std::vector<double> y;
  double objective = 0.0;
  double kkt_residual = 0.0;
  double max_violation = 0.0;
  int outer_iters = 0;
  int inner_iters = 0;
  bool feasible = true;
  std::string infeasibility;
};

namespace detail_qp {

// Clamped forward recursion (the simulator's semantics): stored[t] is
// allowed to go negative so that stored[t] >= 0 is exactly the emptiness
// constraint; charge beyond capacity spills.
inline void battery_forward_clamped(const BatteryQp& qp, const std::vector<double>& y,
                                    std::vector<double>& stored) {
  const int n = qp.size();
  stored.resize(n);
  double b = qp.battery.b_initial_kwh;
  for (int t = 0; t < n; ++t) {
    const double net = qp.e_kw[t] - (qp.x_kw[t] - y[t]);
    b += net >= 0.0 ? qp.tau_h * qp.battery.eta_charge * net
                    : qp.tau_h * net / qp.battery.eta_discharge;
    if (b > qp.battery.b_max_kwh) b = qp.battery.b_max_kwh;
    stored[t] = b;
  }
}

// Un-clamped forward with explicit spill: stored[t] in terms of the
// decision vector z = (y_0..y_{n-1}, s_0..s_{n-1}); slope[t] is
// d(flux_t)/d(y_t) on the current piece.
inline void battery_forward_spill(const BatteryQp& qp, const std::vector<double>& z,
                                  std::vector<double>& stored, std::vector<double>& slope) {
  const int n = qp.size();
  stored.resize(n);
  slope.resize(n);
  double b = qp.battery.b_initial_kwh;
  for (int t = 0; t < n; ++t) {
    const double net = qp.e_kw[t] - (qp.x_kw[t] - z[t]);
    if (net >= 0.0) {
      b += qp.tau_h * qp.battery.eta_charge * net;
      slope[t] = qp.tau_h * qp.battery.eta_charge;
    } else {
      b += qp.tau_h * net / qp.battery.eta_discharge;
      slope[t] = qp.tau_h / qp.battery.eta_discharge;
    }
    b -= z[n + t];  // spilled energy
    stored[t] = b;
  }
}

}  // namespace detail_qp

inline QpResult solve_battery_qp(const BatteryQp& qp) {
  const int n = qp.size();
  QpResult res;
  res.y.assign(n, 0.0);
  if (n == 0) return res;

  std::vector<double> stored, slope;

  // Instance feasibility: stored energy is monotone in every y[t] under
  // the clamped dynamics, so the instance is feasible iff buying at the
  // upper bound everywhere is.
  for (int t = 0; t < n; ++t)
    if (qp.ub[t] < qp.lb[t] - 1e-12) {
      res.feasible = false;
      res.infeasibility = "empty box at slot " + std::to_string(t);
      return res;
    }
  detail_qp::battery_forward_clamped(qp, qp.ub, stored);
  for (int t = 0; t < n; ++t)
    if (stored[t] < -1e-9) {
      res.feasible = false;
      res.infeasibility = "demand unservable at slot " + std::to_string(t) +
                          " (deficit " + std::to_string(-stored[t]) + " kWh)";
      return res;
    }

  auto objective = [&](const std::vector<double>& z) {
    double v = 0.0;
    for (int t = 0; t < n; ++t) {
      const double d = z[t] - qp.target[t];
      v += qp.lin[t] * z[t] + qp.quad * d * d;
    }
    return v;
  };

  // Initial point: warm start or target, greedily repaired, with the
  // forced spill of the clamped dynamics made explicit.
  std::vector<double> z(2 * n, 0.0);
  {
    std::vector<double> y0(n);
    for (int t = 0; t < n; ++t) {
      const double init = qp.warm_start.size() == std::size_t(n) ? qp.warm_start[t]
                                                                 : qp.target[t];
      y0[t] = std::clamp(init, qp.lb[t], qp.ub[t]);
    }
    detail_qp::battery_forward_clamped(qp, y0, stored);
    for (int t = 0; t < n; ++t) {
      if (stored[t] < 0.0) {
        for (int s = t; s >= 0 && stored[t] < 0.0; --s) {
          y0[s] = qp.ub[s];
          detail_qp::battery_forward_clamped(qp, y0, stored);
        }
      }
    }
    // explicit spills from the clamped run
    double b = qp.battery.b_initial_kwh;
    for (int t = 0; t < n; ++t) {
      const double net = qp.e_kw[t] - (qp.x_kw[t] - y0[t]);
      b += net >= 0.0 ? qp.tau_h * qp.battery.eta_charge * net
                      : qp.tau_h * net / qp.battery.eta_discharge;
      z[n + t] = std::max(0.0, b - qp.battery.b_max_kwh);
      b = std::min(b, qp.battery.b_max_kwh);
      z[t] = y0[t];
    }
  }

  const double spill_cap = qp.battery.b_max_kwh + qp.tau_h * qp.battery.eta_charge *
                                                      (1.0 + qp.battery.p_charge_kw +
                                                       *std::max_element(qp.e_kw.begin(),
                                                                         qp.e_kw.end()) +
                                                       *std::max_element(qp.x_kw.begin(),
                                                                         qp.x_kw.end()));
  auto clamp_var = [&](int i, double v) {
    return i < n ? std::clamp(v, qp.lb[i], qp.ub[i]) : std::clamp(v, 0.0, spill_cap);
  };

  std::vector<double> lam_lo(n, 0.0), lam_hi(n, 0.0);
  double mu = 16.0 * (1.0 + qp.quad);
  double grad_scale = 1.0;
  for (int t = 0; t < n; ++t)
    grad_scale = std::max(grad_scale, std::fabs(qp.lin[t]) +
                                          2.0 * qp.quad * std::fabs(qp.ub[t] - qp.target[t]));
  const double kkt_tol = 1e-6;
  const double feas_tol = 1e-9 * (1.0 + qp.battery.b_max_kwh);

  std::vector<double> grad(2 * n), w(n), suffix(n + 1), trial(2 * n), zz(2 * n),
      z_prev(2 * n);

  // psi(c) for one-sided constraints c >= 0 with multiplier lam
  auto psi = [&](double cval, double lam) {
    return cval <= lam / mu ? -lam * cval + 0.5 * mu * cval * cval
                            : -0.5 * lam * lam / mu;
  };

  auto lagrangian = [&](const std::vector<double>& p) {
    detail_qp::battery_forward_spill(qp, p, stored, slope);
    double v = objective(p);
    for (int t = 0; t < n; ++t) {
      v += psi(stored[t], lam_lo[t]);
      v += psi(qp.battery.b_max_kwh - stored[t], lam_hi[t]);
    }
    return v;
  };

  // gradient of the augmented lagrangian at p
  auto lagrangian_grad = [&](const std::vector<double>& p, std::vector<double>& g) {
    detail_qp::battery_forward_spill(qp, p, stored, slope);
    for (int t = 0; t < n; ++t)
      g[t] = qp.lin[t] + 2.0 * qp.quad * (p[t] - qp.target[t]);
    for (int t = 0; t < n; ++t) g[n + t] = 0.0;
    // net multiplier estimate on d(stored_t): m_lo pushes up, m_hi down
    for (int t = 0; t < n; ++t) {
      const double m_lo = std::max(0.0, lam_lo[t] - mu * stored[t]);
      const double m_hi =
          std::max(0.0, lam_hi[t] - mu * (qp.battery.b_max_kwh - stored[t]));
      w[t] = m_lo - m_hi;
    }
    suffix[n] = 0.0;
    for (int t = n - 1; t >= 0; --t) suffix[t] = suffix[t + 1] + w[t];
    for (int t = 0; t < n; ++t) {
      g[t] -= slope[t] * suffix[t];
      g[n + t] += suffix[t];
    }
  };

  auto solve_subproblem = [&](double inner_tol, int max_inner) {
    zz = z;
    z_prev = z;
    double theta = 1.0;
    double step = 1.0 / (2.0 * qp.quad + mu + 1.0);
    double lz_best = lagrangian(z);
    for (int inner = 0; inner < max_inner; ++inner) {
      ++res.inner_iters;
      lagrangian_grad(zz, grad);
      const double lzz = lagrangian(zz);
      bool accepted = false;
      double lnew = lz_best;
      for (int bt = 0; bt < 60; ++bt) {
        double sq = 0.0, lin_term = 0.0;
        for (int i = 0; i < 2 * n; ++i) {
          trial[i] = clamp_var(i, zz[i] - step * grad[i]);
          const double d = trial[i] - zz[i];
          sq += d * d;
          lin_term += grad[i] * d;
        }
        if (sq == 0.0) break;
        lnew = lagrangian(trial);
        if (lnew <= lzz + lin_term + sq / (2.0 * step)) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;

      if (lnew > lz_best) {  // restart momentum from the incumbent
        theta = 1.0;
        zz = z;
        continue;
      }
      const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
      const double beta = (theta - 1.0) / theta_next;
      for (int i = 0; i < 2 * n; ++i)
        zz[i] = clamp_var(i, trial[i] + beta * (trial[i] - z_prev[i]));
      z_prev = z;
      z = trial;
      theta = theta_next;
      lz_best = lnew;
      step *= 1.3;

      lagrangian_grad(z, grad);
      double resid = 0.0;
      for (int i = 0; i < 2 * n; ++i)
        resid = std::max(resid, std::fabs(z[i] - clamp_var(i, z[i] - grad[i])));
      if (resid <= inner_tol) break;
    }
  };

  const int max_outer = 60;
  double inner_tol = 1e-4 * grad_scale;
  double prev_viol = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer < max_outer; ++outer) {
    res.outer_iters = outer + 1;
    solve_subproblem(inner_tol, 40000);

    detail_qp::battery_forward_spill(qp, z, stored, slope);
    double viol = 0.0;
    for (int t = 0; t < n; ++t) {
      viol = std::max(viol, -stored[t]);
      viol = std::max(viol, stored[t] - qp.battery.b_max_kwh);
      lam_lo[t] = std::max(0.0, lam_lo[t] - mu * stored[t]);
      lam_hi[t] = std::max(0.0, lam_hi[t] - mu * (qp.battery.b_max_kwh - stored[t]));
    }
    // KKT residual with the updated multipliers
    for (int t = 0; t < n; ++t)
      grad[t] = qp.lin[t] + 2.0 * qp.quad * (z[t] - qp.target[t]);
    for (int t = 0; t < n; ++t) grad[n + t] = 0.0;
    for (int t = 0; t < n; ++t) w[t] = lam_lo[t] - lam_hi[t];
    suffix[n] = 0.0;
    for (int t = n - 1; t >= 0; --t) suffix[t] = suffix[t + 1] + w[t];
    for (int t = 0; t < n; ++t) {
      grad[t] -= slope[t] * suffix[t];
      grad[n + t] += suffix[t];
    }
    double kkt = 0.0;
    for (int i = 0; i < 2 * n; ++i)
      kkt = std::max(kkt, std::fabs(z[i] - clamp_var(i, z[i] - grad[i])));
    res.kkt_residual = kkt / grad_scale;
    res.max_violation = viol;
    if (viol <= feas_tol && res.kkt_residual <= kkt_tol) break;
    if (viol > 0.25 * prev_viol) mu = std::min(mu * 2.0, 1e7);
    prev_viol = viol;
    inner_tol = std::max(inner_tol * 0.25, 1e-9 * grad_scale);
  }

  // Validate under the clamped (simulator) dynamics and nudge inside.
  std::vector<double> y(z.begin(), z.begin() + n);
  detail_qp::battery_forward_clamped(qp, y, stored);
  for (int t = 0; t < n; ++t) {
    if (stored[t] < 0.0) {
      const double s =
          (qp.e_kw[t] - (qp.x_kw[t] - y[t])) >= 0.0 ? qp.tau_h * qp.battery.eta_charge
                                                    : qp.tau_h / qp.battery.eta_discharge;
      const double bump = std::min(-stored[t] / s + 1e-12, qp.ub[t] - y[t]);
      if (bump > 0.0) {
        y[t] += bump;
        detail_qp::battery_forward_clamped(qp, y, stored);
      }
    }
  }
  res.max_violation = 0.0;
  for (int t = 0; t < n; ++t) res.max_violation = std::max(res.max_violation, -stored[t]);

  res.y = y;
  res.objective = objective(y);
  return res;
}

}  // namespace smp::policies
