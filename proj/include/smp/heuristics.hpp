#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "smp/info.hpp"
#include "smp/policies.hpp"
#include "smp/rng.hpp"
#include "smp/simulate.hpp"

namespace smp::policies {

struct SteppingSpec {
  enum class Variant { hold, charge_greedy, random };
  double beta_kw = 0.0;
  Variant variant = Variant::hold;
  double ewma = 0.0;  // 0 disables the smoothed steady-state reference

  void validate(const BatterySpec& spec) const {
    if (beta_kw <= 0.0) throw ModelError("stepping: beta must be positive");
    if (beta_kw > std::min(spec.p_charge_kw, spec.p_discharge_kw) + 1e-12)
      throw ModelError("stepping: beta exceeds the peak power constraints");
    if (ewma < 0.0 || ewma > 1.0) throw ModelError("stepping: ewma outside [0,1]");
  }
};

struct SteppingResult {
  GridTrace grid;
  std::vector<SystemState> states;
  std::vector<int> privacy_breaks;  // slots where neither adjacent level was feasible
};

namespace detail_heur {

inline bool level_feasible(double level, const StepView& v) {
  return !check_feasible(v.x_kw, level, v.e_kw, SystemState{v.t, v.stored_kwh},
                         *v.battery, v.slot_hours)
              .has_value();
}

// Nearest feasible multiple of beta to x (used as the logged fallback when
// the quantizer gets cornered). The feasible interval always spans at
// least [x, x + p_charge], which contains a grid point since
// beta <= p_charge.
inline double nearest_feasible_level(double beta, const StepView& v) {
  const long h0 = std::lround(v.x_kw / beta);
  for (long d = 0; d < 1000000; ++d) {
    for (long sgn : {+1L, -1L}) {
      const long h = h0 + sgn * d;
      if (h < 0) continue;
      const double level = double(h) * beta;
      if (level_feasible(level, v)) return level;
      if (d == 0) break;  // h0 checked once
    }
  }
  throw FeasibilityError("stepping: no feasible quantization level", v.t);
}

}  // namespace detail_heur

// Quantized shaping: the grid load lives on the beta-grid and is chosen
// between the two levels adjacent to the user load. `hold` keeps the
// previous level for as long as it stays adjacent and feasible,
// `charge_greedy` charges until the battery is full, then discharges
// until empty, `random` picks a feasible adjacent level uniformly.
inline SteppingResult stepping_policy(const LoadTrace& trace, const BatterySpec& spec,
                                      const SteppingSpec& stepping, std::uint64_t seed) {
  trace.validate();
  spec.validate();
  stepping.validate(spec);
  const double beta = stepping.beta_kw;

  Rng rng(seed);
  SteppingResult result;
  double prev_level = std::round(trace.load_kw[0] / beta) * beta;
  double ewma_ref = trace.load_kw[0];
  bool charging = true;

  auto policy = [&](const StepView& v) -> double {
    if (stepping.ewma > 0.0 && v.t > 0)
      ewma_ref = stepping.ewma * v.x_kw + (1.0 - stepping.ewma) * ewma_ref;

    const double lo = std::floor(v.x_kw / beta + 1e-9) * beta;
    const double hi = std::ceil(v.x_kw / beta - 1e-9) * beta;
    const bool lo_ok = detail_heur::level_feasible(lo, v);
    const bool hi_ok = hi == lo ? lo_ok : detail_heur::level_feasible(hi, v);

    double y;
    if (!lo_ok && !hi_ok) {
      y = detail_heur::nearest_feasible_level(beta, v);
      result.privacy_breaks.push_back(v.t);
      prev_level = y;
      return y;
    }

    switch (stepping.variant) {
      case SteppingSpec::Variant::hold: {
        const bool prev_adjacent =
            std::fabs(prev_level - lo) < 1e-9 || std::fabs(prev_level - hi) < 1e-9;
        if (prev_adjacent && detail_heur::level_feasible(prev_level, v)) {
          y = prev_level;
          break;
        }
        const double ref = stepping.ewma > 0.0 ? ewma_ref : prev_level;
        if (lo_ok && hi_ok)
          y = std::fabs(lo - ref) <= std::fabs(hi - ref) ? lo : hi;
        else
          y = lo_ok ? lo : hi;
        break;
      }
      case SteppingSpec::Variant::charge_greedy: {
        if (v.stored_kwh >= v.battery->b_max_kwh - 1e-9) charging = false;
        if (v.stored_kwh <= 1e-9) charging = true;
        if (charging)
          y = hi_ok ? hi : lo;
        else
          y = lo_ok ? lo : hi;
        break;
      }
      case SteppingSpec::Variant::random:
      default: {
        if (lo_ok && hi_ok && hi != lo)
          y = rng.next_int(2) == 0 ? lo : hi;
        else
          y = lo_ok ? lo : hi;
        break;
      }
    }
    prev_level = y;
    return y;
  };

  ResModel res;
  res.kind = trace.has_res() ? ResModel::Kind::trace : ResModel::Kind::none;
  SimResult sim = simulate(trace, spec, res, policy, seed);
  result.grid = std::move(sim.grid);
  result.states = std::move(sim.states);
  return result;
}

// Track the previous grid level: discharge when demand rises above it,
// charge when demand falls below it, clamped to whatever the battery can
// actually absorb or supply. Never buys energy it would have to spill.
inline SimResult best_effort_policy(const LoadTrace& trace, const BatterySpec& spec) {
  trace.validate();
  spec.validate();
  auto policy = [&](const StepView& v) -> double {
    const double tau = v.slot_hours;
    double lb = v.x_kw - std::min(spec.p_discharge_kw,
                                  (v.stored_kwh * spec.eta_discharge) / tau + v.e_kw);
    if (!spec.allow_sell) lb = std::max(lb, 0.0);
    const double headroom =
        (spec.b_max_kwh - v.stored_kwh) / (tau * spec.eta_charge) - v.e_kw;
    const double ub = v.x_kw + std::clamp(headroom, 0.0, spec.p_charge_kw);
    return std::clamp(v.y_prev_kw, std::min(lb, ub), ub);
  };
  ResModel res;
  res.kind = trace.has_res() ? ResModel::Kind::trace : ResModel::Kind::none;
  return simulate(trace, spec, res, policy, 0);
}

// Per-slot greedy surrogate of the wear-aware shaping objective: each slot
// minimizes (1-alpha)*tau*C*y + alpha*(y-W)^2 plus the wear cost when the
// battery is active, plus an optional level guard
// kappa*(B - B_max/2)*(x - y) that nudges the battery toward half charge.
inline GridTrace myopic_online_policy(const LoadTrace& trace, const TariffSchedule& tariff,
                                      const BatterySpec& spec, const PolicyWeights& weights,
                                      std::optional<double> w = {},
                                      double level_guard = 0.0) {
  trace.validate();
  spec.validate();
  weights.validate();
  tariff.validate(trace.size());
  const double target = w.value_or(trace.mean_load());

  auto policy = [&](const StepView& v) -> double {
    const double tau = v.slot_hours;
    const double price = tariff.price_at(v.t);
    double lb = v.x_kw - std::min(spec.p_discharge_kw,
                                  (v.stored_kwh * spec.eta_discharge) / tau + v.e_kw);
    if (!spec.allow_sell) lb = std::max(lb, 0.0);
    const double ub = v.x_kw + spec.p_charge_kw;

    const double lin = (1.0 - weights.alpha) * tau * price -
                       level_guard * (v.stored_kwh - spec.b_max_kwh / 2.0);
    auto cost = [&](double y) {
      const double d = y - target;
      double c = lin * y + weights.alpha * d * d;
      const double net = v.e_kw - (v.x_kw - y);
      if (std::fabs(net) > 1e-12) c += weights.battery_wear_cost;
      return c;
    };

    std::vector<double> candidates{lb, ub, std::clamp(v.x_kw, lb, ub)};
    if (weights.alpha > 0.0)
      candidates.push_back(std::clamp(target - lin / (2.0 * weights.alpha), lb, ub));
    double best = candidates.front();
    double best_cost = cost(best);
    for (double c : candidates) {
      const double cc = cost(c);
      if (cc < best_cost - 1e-15) {
        best = c;
        best_cost = cc;
      }
    }
    return best;
  };
  ResModel res;
  res.kind = trace.has_res() ? ResModel::Kind::trace : ResModel::Kind::none;
  return simulate(trace, spec, res, policy, 0).grid;
}

// Stochastic memoryless shaping: each slot draws the grid load from the
// channel row of the current user load. The channel support must satisfy
// 0 <= x - y <= p_peak so that the renewable source can cover the gap.
inline GridTrace memoryless_channel_policy(const LoadTrace& trace,
                                           const info::ChannelMatrix& channel,
                                           double p_peak, std::uint64_t seed) {
  trace.validate();
  channel.validate();
  for (std::size_t i = 0; i < channel.in_values.size(); ++i)
    for (std::size_t j = 0; j < channel.out_values.size(); ++j)
      if (channel.rows[i][j] > 0.0) {
        const double d = channel.in_values[i] - channel.out_values[j];
        if (d < -1e-9 || d > p_peak + 1e-9)
          throw ModelError("channel policy: support violates 0 <= x - y <= p_peak");
      }

  Rng rng(seed);
  GridTrace grid;
  grid.y_kw.reserve(trace.load_kw.size());
  for (double x : trace.load_kw) {
    int row = -1;
    for (std::size_t i = 0; i < channel.in_values.size(); ++i)
      if (std::fabs(channel.in_values[i] - x) < 1e-6) {
        row = int(i);
        break;
      }
    if (row < 0) throw ModelError("channel policy: load value not in channel alphabet");
    const double u = rng.next_double();
    double acc = 0.0;
    int pick = int(channel.out_values.size()) - 1;
    for (std::size_t j = 0; j < channel.out_values.size(); ++j) {
      acc += channel.rows[row][j];
      if (u < acc) {
        pick = int(j);
        break;
      }
    }
    grid.y_kw.push_back(channel.out_values[pick]);
  }
  return grid;
}

// Appliance-level flatness measures over a per-appliance grid-load matrix:
// per-appliance distance of each slot to every other slot, per-slot
// distance between every appliance pair, and the total variation of the
// aggregate across consecutive slots.
struct SimilarityReport {
  std::vector<std::vector<double>> temporal_self;  // [appliance][anchor slot]
  std::vector<double> pairwise_per_slot;           // [slot]
  double aggregate_consecutive = 0.0;
};

inline SimilarityReport appliance_similarity_metrics(
    const std::vector<std::vector<double>>& app_kw) {
  if (app_kw.empty() || app_kw.front().empty())
    throw ModelError("similarity: missing appliance data");
  const int na = int(app_kw.size());
  const int n = int(app_kw.front().size());
  for (const auto& a : app_kw)
    if (int(a.size()) != n) throw ModelError("similarity: ragged appliance matrix");

  SimilarityReport rep;
  rep.temporal_self.assign(na, std::vector<double>(n, 0.0));
  for (int a = 0; a < na; ++a)
    for (int t0 = 0; t0 < n; ++t0) {
      double s = 0.0;
      for (int t = 0; t < n; ++t)
        if (t != t0) s += std::fabs(app_kw[a][t] - app_kw[a][t0]);
      rep.temporal_self[a][t0] = s;
    }

  rep.pairwise_per_slot.assign(n, 0.0);
  for (int t = 0; t < n; ++t) {
    double s = 0.0;
    for (int a = 0; a < na - 1; ++a)
      for (int j = a + 1; j < na; ++j) s += std::fabs(app_kw[a][t] - app_kw[j][t]);
    rep.pairwise_per_slot[t] = s;
  }

  double agg = 0.0;
  for (int t = 0; t + 1 < n; ++t) {
    double d = 0.0;
    for (int a = 0; a < na; ++a) d += app_kw[a][t + 1] - app_kw[a][t];
    agg += std::fabs(d);
  }
  rep.aggregate_consecutive = agg;
  return rep;
}

}  // namespace smp::policies
