#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "smp/errors.hpp"

namespace smp {

// Discrete-time household demand series. Powers are piecewise constant
// over slots of `slot_hours`, so power (kW) and per-slot energy (kWh)
// differ by the factor slot_hours.
struct LoadTrace {
  double slot_hours = 1.0;
  std::vector<double> load_kw;
  std::vector<double> res_kw;  // empty when no renewable generation series
  std::vector<std::string> appliance_names;
  std::vector<std::vector<double>> appliance_kw;  // [appliance][slot]

  int size() const { return int(load_kw.size()); }
  bool has_res() const { return !res_kw.empty(); }
  bool has_appliances() const { return !appliance_kw.empty(); }

  double mean_load() const {
    if (load_kw.empty()) return 0.0;
    return std::accumulate(load_kw.begin(), load_kw.end(), 0.0) / double(load_kw.size());
  }

  double max_load() const {
    double m = 0.0;
    for (double v : load_kw) m = std::max(m, v);
    return m;
  }

  void validate() const {
    if (slot_hours <= 0.0) throw ModelError("trace: slot duration must be positive");
    if (load_kw.empty()) throw ModelError("trace: empty load series");
    for (std::size_t t = 0; t < load_kw.size(); ++t)
      if (load_kw[t] < 0.0)
        throw ModelError("trace: negative load at slot " + std::to_string(t));
    if (!res_kw.empty()) {
      if (res_kw.size() != load_kw.size())
        throw ModelError("trace: res series length mismatch");
      for (std::size_t t = 0; t < res_kw.size(); ++t)
        if (res_kw[t] < 0.0)
          throw ModelError("trace: negative res at slot " + std::to_string(t));
    }
    if (!appliance_kw.empty()) {
      if (appliance_names.size() != appliance_kw.size())
        throw ModelError("trace: appliance names/series count mismatch");
      for (const auto& a : appliance_kw)
        if (a.size() != load_kw.size())
          throw ModelError("trace: appliance series length mismatch");
      for (std::size_t t = 0; t < load_kw.size(); ++t) {
        double s = 0.0;
        for (const auto& a : appliance_kw) s += a[t];
        if (std::fabs(s - load_kw[t]) > 1e-9)
          throw ModelError("trace: appliance columns do not sum to load at slot " +
                           std::to_string(t));
      }
    }
  }
};

struct GridTrace {
  std::vector<double> y_kw;
  int size() const { return int(y_kw.size()); }
};

struct PricePeriod {
  int start_slot = 0;  // inclusive
  int end_slot = 0;    // exclusive
  double price = 0.0;  // currency per kWh
};

// Time-of-use tariff: contiguous, non-overlapping periods covering the
// whole horizon.
struct TariffSchedule {
  std::vector<PricePeriod> periods;

  static TariffSchedule flat(double price, int horizon) {
    TariffSchedule t;
    t.periods.push_back({0, horizon, price});
    return t;
  }

  int horizon() const { return periods.empty() ? 0 : periods.back().end_slot; }

  void validate(int expected_horizon) const {
    if (periods.empty()) throw ModelError("tariff: no price periods");
    int cursor = 0;
    for (std::size_t i = 0; i < periods.size(); ++i) {
      const auto& p = periods[i];
      if (p.start_slot != cursor)
        throw ModelError("tariff: period " + std::to_string(i) +
                         " does not start where the previous one ends");
      if (p.end_slot <= p.start_slot)
        throw ModelError("tariff: period " + std::to_string(i) + " is empty");
      if (p.price < 0.0)
        throw ModelError("tariff: negative price in period " + std::to_string(i));
      cursor = p.end_slot;
    }
    if (cursor != expected_horizon)
      throw ModelError("tariff: periods cover " + std::to_string(cursor) +
                       " slots, horizon is " + std::to_string(expected_horizon));
  }

  int period_of(int t) const {
    for (std::size_t i = 0; i < periods.size(); ++i)
      if (t >= periods[i].start_slot && t < periods[i].end_slot) return int(i);
    throw ModelError("tariff: slot " + std::to_string(t) + " outside schedule");
  }

  double price_at(int t) const { return periods[period_of(t)].price; }

  std::vector<double> per_slot(int horizon) const {
    std::vector<double> c(horizon);
    for (int t = 0; t < horizon; ++t) c[t] = price_at(t);
    return c;
  }
};

// Target grid-load profile the shaping policies try to match.
struct TargetProfile {
  enum class Kind { constant, piecewise, series };
  Kind kind = Kind::constant;
  double constant_kw = 0.0;
  std::vector<double> piecewise_kw;  // one value per tariff period
  std::vector<double> series_kw;     // one value per slot

  static TargetProfile constant(double w) {
    TargetProfile p;
    p.kind = Kind::constant;
    p.constant_kw = w;
    return p;
  }
  static TargetProfile piecewise(std::vector<double> w) {
    TargetProfile p;
    p.kind = Kind::piecewise;
    p.piecewise_kw = std::move(w);
    return p;
  }
  static TargetProfile series(std::vector<double> w) {
    TargetProfile p;
    p.kind = Kind::series;
    p.series_kw = std::move(w);
    return p;
  }

  // Expand to one value per slot. The tariff is only needed for piecewise
  // targets.
  std::vector<double> per_slot(int horizon, const TariffSchedule* tariff = nullptr) const {
    std::vector<double> w(horizon, constant_kw);
    switch (kind) {
      case Kind::constant:
        break;
      case Kind::piecewise: {
        if (tariff == nullptr)
          throw ModelError("target: piecewise profile needs a tariff");
        if (piecewise_kw.size() != tariff->periods.size())
          throw ModelError("target: piecewise values do not match tariff periods");
        for (int t = 0; t < horizon; ++t) w[t] = piecewise_kw[tariff->period_of(t)];
        break;
      }
      case Kind::series:
        if (int(series_kw.size()) != horizon)
          throw ModelError("target: series length does not match horizon");
        w = series_kw;
        break;
    }
    for (double v : w)
      if (v < 0.0) throw ModelError("target: negative target value");
    return w;
  }
};

}  // namespace smp
