#pragma once

#include <string>
#include <utility>
#include <vector>

#include "smp/battery.hpp"
#include "smp/errors.hpp"
#include "smp/trace.hpp"

namespace smp {

// Outcome of one simulated run: how flat the grid load is around the
// target, what the energy cost was, and whatever privacy metrics the
// caller attached afterwards.
struct RunReport {
  double variance_kw2 = 0.0;  // mean squared distance to the target
  double cost = 0.0;          // total energy cost over the horizon
  bool feasible = true;
  std::vector<Violation> violations;
  std::vector<std::pair<std::string, double>> metrics;

  void add_metric(const std::string& name, double value) {
    metrics.emplace_back(name, value);
  }
};

inline RunReport evaluate(const GridTrace& grid, const LoadTrace& trace,
                          const TariffSchedule& tariff, const TargetProfile& target) {
  const int n = trace.size();
  if (grid.size() != n) throw ModelError("evaluate: grid/trace length mismatch");
  tariff.validate(n);
  const std::vector<double> w = target.per_slot(n, &tariff);

  RunReport report;
  double sq = 0.0;
  double cost = 0.0;
  for (int t = 0; t < n; ++t) {
    const double d = grid.y_kw[t] - w[t];
    sq += d * d;
    cost += trace.slot_hours * grid.y_kw[t] * tariff.price_at(t);
  }
  report.variance_kw2 = sq / double(n);
  report.cost = cost;
  return report;
}

}  // namespace smp
