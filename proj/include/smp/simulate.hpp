#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "smp/battery.hpp"
#include "smp/errors.hpp"
#include "smp/res.hpp"
#include "smp/trace.hpp"

namespace smp {

// What a policy sees when deciding the grid load of slot t. Causal
// policies must only read x/e up to t (the full trace pointer exists for
// policies flagged offline).
struct StepView {
  int t = 0;
  double x_kw = 0.0;
  double e_kw = 0.0;
  double stored_kwh = 0.0;
  double y_prev_kw = 0.0;  // equals x_0 at t = 0
  double slot_hours = 1.0;
  const LoadTrace* trace = nullptr;
  const BatterySpec* battery = nullptr;
  const std::vector<double>* res = nullptr;
};

struct SimResult {
  GridTrace grid;
  std::vector<SystemState> states;  // states[t] holds the level entering slot t,
                                    // plus one trailing end-of-horizon state
};

// Drive a policy over the trace slot by slot. Every step is validated
// before it is applied; an infeasible decision aborts with the slot and
// the violated constraint. Deterministic given the seed (the seed only
// feeds the renewable generator here; stochastic policies own their
// seeds).
template <typename Policy>
SimResult simulate(const LoadTrace& trace, const BatterySpec& spec, const ResModel& res,
                   Policy&& policy, std::uint64_t seed) {
  trace.validate();
  spec.validate();
  const int n = trace.size();
  const std::vector<double> e = res.generate(n, &trace, seed);

  SimResult out;
  out.grid.y_kw.resize(n);
  out.states.reserve(n + 1);

  SystemState state{0, spec.b_initial_kwh};
  double y_prev = trace.load_kw[0];
  for (int t = 0; t < n; ++t) {
    out.states.push_back(state);
    StepView view{t,      trace.load_kw[t], e[t],   state.stored_kwh, y_prev,
                  trace.slot_hours, &trace, &spec, &e};
    const double y = policy(view);
    // battery_update re-checks feasibility and throws with slot context
    state = battery_update(state, trace.load_kw[t], y, e[t], spec, trace.slot_hours);
    out.grid.y_kw[t] = y;
    y_prev = y;
  }
  out.states.push_back(state);
  return out;
}

// Re-validate a finished grid trace against the physical constraints,
// independent of whichever policy produced it.
inline std::vector<Violation> validate_grid(const GridTrace& grid, const LoadTrace& trace,
                                            const BatterySpec& spec, const ResModel& res,
                                            std::uint64_t seed) {
  std::vector<Violation> violations;
  const int n = trace.size();
  if (grid.size() != n) throw ModelError("validate_grid: length mismatch");
  const std::vector<double> e = res.generate(n, &trace, seed);
  SystemState state{0, spec.b_initial_kwh};
  for (int t = 0; t < n; ++t) {
    if (auto v = check_feasible(trace.load_kw[t], grid.y_kw[t], e[t], state, spec,
                                trace.slot_hours)) {
      violations.push_back(*v);
      // continue from the clamped state so later slots are still checked
      double next = state.stored_kwh +
                    detail::stored_delta_kwh(trace.load_kw[t], grid.y_kw[t], e[t], spec,
                                             trace.slot_hours);
      state = SystemState{t + 1, std::min(std::max(next, 0.0), spec.b_max_kwh)};
    } else {
      state = battery_update(state, trace.load_kw[t], grid.y_kw[t], e[t], spec,
                             trace.slot_hours);
    }
  }
  return violations;
}

}  // namespace smp
