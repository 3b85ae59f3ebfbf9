#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "smp/errors.hpp"

namespace smp {

struct BatterySpec {
  double b_max_kwh = 0.0;
  double p_charge_kw = 0.0;     // peak charging power
  double p_discharge_kw = 0.0;  // peak discharging power
  double eta_charge = 1.0;      // in (0, 1]
  double eta_discharge = 1.0;   // in (0, 1]
  double b_initial_kwh = 0.0;
  bool allow_sell = false;      // grid load may go negative (sell at buy price)
  double p_avg_kw = -1.0;       // average shaping-power budget; < 0 means unset

  void validate() const {
    if (b_max_kwh < 0.0) throw ModelError("battery: negative capacity");
    if (p_charge_kw < 0.0 || p_discharge_kw < 0.0)
      throw ModelError("battery: negative peak power");
    if (eta_charge <= 0.0 || eta_charge > 1.0 || eta_discharge <= 0.0 || eta_discharge > 1.0)
      throw ModelError("battery: efficiencies must be in (0,1]");
    if (b_initial_kwh < 0.0 || b_initial_kwh > b_max_kwh + 1e-12)
      throw ModelError("battery: initial charge outside [0, capacity]");
  }
};

struct SystemState {
  int t = 0;
  double stored_kwh = 0.0;
};

enum class ViolationKind {
  discharge_peak,
  charge_peak,
  battery_empty,
  negative_grid,
};

struct Violation {
  ViolationKind kind;
  int slot;
  double amount;  // how far past the constraint, in kW or kWh

  std::string describe() const {
    auto name = [](ViolationKind k) {
      switch (k) {
        case ViolationKind::discharge_peak: return "discharge-peak";
        case ViolationKind::charge_peak: return "charge-peak";
        case ViolationKind::battery_empty: return "battery-empty";
        case ViolationKind::negative_grid: return "negative-grid";
      }
      return "?";
    };
    return std::string(name(kind)) + " at slot " + std::to_string(slot) +
           " (excess " + std::to_string(amount) + ")";
  }
};

namespace detail {
constexpr double kFeasTol = 1e-9;

// Battery flux for one slot: positive net flow charges at eta_c, negative
// discharges at 1/eta_d. Returns the signed change in stored energy before
// the capacity clamp.
inline double stored_delta_kwh(double x_kw, double y_kw, double e_kw,
                               const BatterySpec& spec, double tau_h) {
  const double net_kw = e_kw - (x_kw - y_kw);
  const double inflow = std::max(net_kw, 0.0);
  const double outflow = std::max(-net_kw, 0.0);
  return tau_h * (spec.eta_charge * inflow - outflow / spec.eta_discharge);
}
}  // namespace detail

// First violated constraint for one candidate slot, in the order:
// discharge peak, charge peak, battery emptiness, negative grid load.
inline std::optional<Violation> check_feasible(double x_kw, double y_kw, double e_kw,
                                               const SystemState& state,
                                               const BatterySpec& spec, double tau_h) {
  using detail::kFeasTol;
  const double diff = x_kw - y_kw;
  if (diff > spec.p_discharge_kw + kFeasTol)
    return Violation{ViolationKind::discharge_peak, state.t, diff - spec.p_discharge_kw};
  if (-diff > spec.p_charge_kw + kFeasTol)
    return Violation{ViolationKind::charge_peak, state.t, -diff - spec.p_charge_kw};
  const double next = state.stored_kwh + detail::stored_delta_kwh(x_kw, y_kw, e_kw, spec, tau_h);
  if (next < -kFeasTol)
    return Violation{ViolationKind::battery_empty, state.t, -next};
  if (!spec.allow_sell && y_kw < -kFeasTol)
    return Violation{ViolationKind::negative_grid, state.t, -y_kw};
  return std::nullopt;
}

// One slot of the stored-energy recursion. Excess charge beyond capacity is
// spilled (the min-clamp); a step that would drive the battery negative is
// a feasibility error.
inline SystemState battery_update(const SystemState& state, double x_kw, double y_kw,
                                  double e_kw, const BatterySpec& spec, double tau_h) {
  if (auto v = check_feasible(x_kw, y_kw, e_kw, state, spec, tau_h))
    throw FeasibilityError("infeasible step: " + v->describe(), state.t);
  double next = state.stored_kwh + detail::stored_delta_kwh(x_kw, y_kw, e_kw, spec, tau_h);
  next = std::min(next, spec.b_max_kwh);
  next = std::max(next, 0.0);  // absorb the feasibility tolerance
  return SystemState{state.t + 1, next};
}

}  // namespace smp
