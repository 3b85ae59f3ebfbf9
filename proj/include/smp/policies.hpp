#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "smp/evaluate.hpp"
#include "smp/qp.hpp"
#include "smp/trace.hpp"

namespace smp::policies {

struct PolicyWeights {
  double alpha = 0.5;              // 0 = all cost, 1 = all flatness
  double battery_wear_cost = 0.0;  // per slot with battery activity

  void validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw ModelError("weights: alpha outside [0,1]");
    if (battery_wear_cost < 0.0) throw ModelError("weights: negative wear cost");
  }
};

struct HorizonSpec {
  int future = 0;  // slots of lookahead beyond the current one
  int past = 0;    // committed slots kept in the smoothing term

  void validate(int horizon) const {
    if (future < 0 || past < 0) throw ModelError("horizon: negative window");
    if (future + 1 > horizon) throw ModelError("horizon: lookahead exceeds trace");
  }
};

struct OfflineSolution {
  GridTrace grid;
  TargetProfile target;
  double objective = 0.0;
  double kkt_residual = 0.0;
  bool feasible = true;
  std::string infeasibility;
};

struct PiecewiseSolution : OfflineSolution {
  std::vector<double> period_targets;
  std::vector<double> objective_trace;  // after every half step of the descent
};

namespace detail_pol {

inline std::vector<double> res_series(const LoadTrace& trace) {
  if (trace.has_res()) return trace.res_kw;
  return std::vector<double>(std::size_t(trace.size()), 0.0);
}

inline BatteryQp make_qp(const LoadTrace& trace, const TariffSchedule& tariff,
                         const BatterySpec& spec, const PolicyWeights& weights) {
  const int n = trace.size();
  BatteryQp qp;
  qp.x_kw = trace.load_kw;
  qp.e_kw = res_series(trace);
  qp.tau_h = trace.slot_hours;
  qp.battery = spec;
  qp.quad = weights.alpha;
  qp.lin.resize(n);
  qp.lb.resize(n);
  qp.ub.resize(n);
  qp.target.assign(n, 0.0);
  for (int t = 0; t < n; ++t) {
    qp.lin[t] = (1.0 - weights.alpha) * trace.slot_hours * tariff.price_at(t);
    const double floor = spec.allow_sell ? -1e30 : 0.0;
    qp.lb[t] = std::max(trace.load_kw[t] - spec.p_discharge_kw, floor);
    qp.ub[t] = trace.load_kw[t] + spec.p_charge_kw;
  }
  return qp;
}

inline double shaping_objective(const BatteryQp& qp, const std::vector<double>& y) {
  double v = 0.0;
  for (int t = 0; t < qp.size(); ++t) {
    const double d = y[t] - qp.target[t];
    v += qp.lin[t] * y[t] + qp.quad * d * d;
  }
  return v;
}

}  // namespace detail_pol

// Full-horizon shaping toward one constant target level. W defaults to
// the mean user load.
inline OfflineSolution solve_offline_constant_target(const LoadTrace& trace,
                                                     const TariffSchedule& tariff,
                                                     const BatterySpec& spec,
                                                     const PolicyWeights& weights,
                                                     std::optional<double> w = {}) {
  trace.validate();
  spec.validate();
  weights.validate();
  tariff.validate(trace.size());
  const double target = w.value_or(trace.mean_load());

  BatteryQp qp = detail_pol::make_qp(trace, tariff, spec, weights);
  qp.target.assign(std::size_t(trace.size()), target);
  const QpResult r = solve_battery_qp(qp);

  OfflineSolution sol;
  sol.target = TargetProfile::constant(target);
  sol.feasible = r.feasible;
  sol.infeasibility = r.infeasibility;
  sol.kkt_residual = r.kkt_residual;
  if (r.feasible) {
    sol.grid.y_kw = r.y;
    sol.objective = r.objective;
  }
  return sol;
}

// One target level per tariff period, optimized jointly with the grid
// load by coordinate descent: the per-period mean of Y is the exact
// minimizer of the target block, the Y block reuses the constant-target
// machinery with a per-slot target. Stops when the objective decrease
// falls below 1e-8.
inline PiecewiseSolution solve_piecewise_target(const LoadTrace& trace,
                                                const TariffSchedule& tariff,
                                                const BatterySpec& spec,
                                                const PolicyWeights& weights) {
  trace.validate();
  spec.validate();
  weights.validate();
  const int n = trace.size();
  tariff.validate(n);
  const int m = int(tariff.periods.size());

  PiecewiseSolution sol;
  std::vector<double> wp(m, 0.0);
  for (int i = 0; i < m; ++i) {
    const auto& p = tariff.periods[i];
    double s = 0.0;
    for (int t = p.start_slot; t < p.end_slot; ++t) s += trace.load_kw[t];
    wp[i] = s / double(p.end_slot - p.start_slot);
  }

  BatteryQp qp = detail_pol::make_qp(trace, tariff, spec, weights);
  double prev = std::numeric_limits<double>::infinity();
  std::vector<double> incumbent;
  double kkt = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    for (int t = 0; t < n; ++t) qp.target[t] = wp[tariff.period_of(t)];
    qp.warm_start = incumbent;
    QpResult r = solve_battery_qp(qp);
    if (!r.feasible) {
      sol.feasible = false;
      sol.infeasibility = r.infeasibility;
      return sol;
    }
    // keep the incumbent when the inexact solve fails to improve on it
    if (!incumbent.empty() &&
        detail_pol::shaping_objective(qp, incumbent) < r.objective) {
      r.y = incumbent;
      r.objective = detail_pol::shaping_objective(qp, incumbent);
    }
    incumbent = r.y;
    kkt = r.kkt_residual;
    sol.objective_trace.push_back(r.objective);

    for (int i = 0; i < m; ++i) {
      const auto& p = tariff.periods[i];
      double s = 0.0;
      for (int t = p.start_slot; t < p.end_slot; ++t) s += r.y[t];
      wp[i] = std::max(0.0, s / double(p.end_slot - p.start_slot));
    }
    for (int t = 0; t < n; ++t) qp.target[t] = wp[tariff.period_of(t)];
    const double after_w = detail_pol::shaping_objective(qp, r.y);
    sol.objective_trace.push_back(after_w);

    if (prev - after_w < 1e-8) {
      prev = after_w;
      break;
    }
    prev = after_w;
  }

  sol.grid.y_kw = incumbent;
  sol.objective = prev;
  sol.kkt_residual = kkt;
  sol.period_targets = wp;
  sol.target = TargetProfile::piecewise(wp);
  return sol;
}

// Zero-phase moving-average target: the boxcar length is matched to the
// requested -3 dB cutoff, boundaries are renormalized so the DC gain is
// exactly 1 everywhere.
inline std::vector<double> lowpass_series(const std::vector<double>& x, double slot_hours,
                                          double cutoff_hz) {
  const double slot_seconds = slot_hours * 3600.0;
  const double nyquist_hz = 0.5 / slot_seconds;
  if (cutoff_hz <= 0.0) throw ModelError("lowpass: cutoff must be positive");
  if (cutoff_hz >= nyquist_hz) throw ModelError("lowpass: cutoff above Nyquist");
  long L = std::lround(0.443 / (cutoff_hz * slot_seconds));
  if (L < 1) L = 1;
  if (L % 2 == 0) ++L;
  const int h = int(L / 2);
  const int n = int(x.size());
  std::vector<double> out(x.size());
  for (int t = 0; t < n; ++t) {
    const int lo = std::max(0, t - h);
    const int hi = std::min(n - 1, t + h);
    double s = 0.0;
    for (int j = lo; j <= hi; ++j) s += x[j];
    out[t] = s / double(hi - lo + 1);
  }
  return out;
}

inline TargetProfile lowpass_target(const LoadTrace& trace, double cutoff_hz) {
  trace.validate();
  return TargetProfile::series(lowpass_series(trace.load_kw, trace.slot_hours, cutoff_hz));
}

enum class TargetMode { fixed, joint, filtered };

struct RecedingSolution {
  GridTrace grid;
  std::vector<double> committed_targets;
  double objective = 0.0;
  bool feasible = true;
  std::string infeasibility;
};

// Receding-horizon shaping: at slot t the window [t, t+H_F] is optimized
// (fixed target, jointly-optimized window target, or a low-pass filtered
// target series over the known prefix), only Y_t is committed, and the
// battery advances with the realized load. In joint mode the previous H_P
// committed grid values stay in the variance term so the window target
// moves smoothly.
inline RecedingSolution solve_receding_horizon(const LoadTrace& trace,
                                               const TariffSchedule& tariff,
                                               const BatterySpec& spec,
                                               const PolicyWeights& weights,
                                               const HorizonSpec& horizon,
                                               TargetMode mode,
                                               std::optional<double> fixed_w = {},
                                               double cutoff_hz = 0.0) {
  trace.validate();
  spec.validate();
  weights.validate();
  const int n = trace.size();
  tariff.validate(n);
  horizon.validate(n);

  const std::vector<double> e = detail_pol::res_series(trace);
  const double w_fixed = fixed_w.value_or(trace.mean_load());

  RecedingSolution sol;
  sol.grid.y_kw.reserve(n);
  sol.committed_targets.reserve(n);

  SystemState state{0, spec.b_initial_kwh};
  for (int t = 0; t < n; ++t) {
    const int hi = std::min(t + horizon.future, n - 1);
    const int len = hi - t + 1;

    BatteryQp qp;
    qp.tau_h = trace.slot_hours;
    qp.battery = spec;
    qp.battery.b_initial_kwh = state.stored_kwh;
    qp.quad = weights.alpha;
    qp.x_kw.assign(trace.load_kw.begin() + t, trace.load_kw.begin() + hi + 1);
    qp.e_kw.assign(e.begin() + t, e.begin() + hi + 1);
    qp.lin.resize(len);
    qp.lb.resize(len);
    qp.ub.resize(len);
    for (int k = 0; k < len; ++k) {
      qp.lin[k] = (1.0 - weights.alpha) * trace.slot_hours * tariff.price_at(t + k);
      const double floor = spec.allow_sell ? -1e30 : 0.0;
      qp.lb[k] = std::max(qp.x_kw[k] - spec.p_discharge_kw, floor);
      qp.ub[k] = qp.x_kw[k] + spec.p_charge_kw;
    }

    double committed_w = w_fixed;
    QpResult r;
    if (mode == TargetMode::fixed) {
      qp.target.assign(std::size_t(len), w_fixed);
      r = solve_battery_qp(qp);
    } else if (mode == TargetMode::filtered) {
      std::vector<double> prefix(trace.load_kw.begin(), trace.load_kw.begin() + hi + 1);
      const std::vector<double> w = lowpass_series(prefix, trace.slot_hours, cutoff_hz);
      qp.target.assign(w.begin() + t, w.begin() + hi + 1);
      r = solve_battery_qp(qp);
      committed_w = qp.target[0];
    } else {
      // joint window target: alternate the closed-form target (window mean
      // including the remembered past) with the window solve
      const int lo_past = std::max(t - horizon.past, 0);
      const int n_past = t - lo_past;
      double past_sum = 0.0;
      for (int k = lo_past; k < t; ++k) past_sum += sol.grid.y_kw[k];
      double wcur = (past_sum + std::accumulate(qp.x_kw.begin(), qp.x_kw.end(), 0.0)) /
                    double(n_past + len);
      double prev_obj = std::numeric_limits<double>::infinity();
      for (int iter = 0; iter < 60; ++iter) {
        qp.target.assign(std::size_t(len), std::max(0.0, wcur));
        r = solve_battery_qp(qp);
        if (!r.feasible) break;
        double ysum = std::accumulate(r.y.begin(), r.y.end(), 0.0);
        wcur = (past_sum + ysum) / double(n_past + len);
        // window objective including the past smoothing term
        double obj = r.objective;
        for (int k = lo_past; k < t; ++k) {
          const double d = sol.grid.y_kw[k] - wcur;
          obj += weights.alpha * d * d;
        }
        if (prev_obj - obj < 1e-8) break;
        prev_obj = obj;
      }
      committed_w = std::max(0.0, wcur);
    }

    if (!r.feasible) {
      sol.feasible = false;
      sol.infeasibility = "slot " + std::to_string(t) + ": " + r.infeasibility;
      return sol;
    }

    const double y = r.y[0];
    sol.grid.y_kw.push_back(y);
    sol.committed_targets.push_back(committed_w);
    state = battery_update(state, trace.load_kw[t], y, e[t], spec, trace.slot_hours);
  }

  // Report the realized objective under the committed targets.
  double obj = 0.0;
  for (int t = 0; t < n; ++t) {
    const double w = (mode == TargetMode::fixed) ? w_fixed : sol.committed_targets[t];
    const double d = sol.grid.y_kw[t] - w;
    obj += (1.0 - weights.alpha) * trace.slot_hours * tariff.price_at(t) * sol.grid.y_kw[t] +
           weights.alpha * d * d;
  }
  sol.objective = obj;
  return sol;
}

}  // namespace smp::policies
