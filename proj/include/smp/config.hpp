#pragma once

#include <optional>
#include <string>
#include <vector>

#include "smp/battery.hpp"
#include "smp/io.hpp"
#include "smp/res.hpp"
#include "smp/trace.hpp"

namespace smp::harness {

using io::json;

struct TraceSource {
  std::string path;     // CSV file, or
  ResModel synthetic;   // generator
  int length = 0;
  bool is_file = false;
};

struct PolicySpec {
  std::string name = "passthrough";
  double alpha = 0.5;
  double wear_cost = 0.0;
  double beta_kw = 0.5;
  std::string variant = "hold";
  double ewma = 0.0;
  int h_future = 0;
  int h_past = 0;
  std::string target = "fixed";  // fixed | joint | filtered
  std::optional<double> w;
  double cutoff_hz = 1e-4;
  double level_guard = 0.0;
  double p_peak = 1e30;
  json channel;  // inline channel matrix for the stochastic policy
};

struct AttackSpec {
  std::string name;   // edge | peak
  double threshold = 0.5;
  double beta_kw = 0.5;
};

struct SweepSpec {
  std::string axis = "none";  // none | alpha | b_max | p_e
  std::vector<double> values;
};

struct ExperimentConfig {
  double slot_hours = 1.0;
  std::uint64_t seed = 1;
  TraceSource trace;
  TariffSchedule tariff;
  bool flat_tariff = true;
  double flat_price = 1.0;
  BatterySpec battery;
  ResModel res;
  PolicySpec policy;
  std::vector<std::string> metrics;
  std::vector<AttackSpec> attacks;
  SweepSpec sweep;
  double edge_threshold = 0.5;
  json raw;  // untouched blocks (ba, attack_exponents, pe_sweep, aggregation)
};

inline ResModel res_model_from_json(const json& j, const std::string& ctx) {
  ResModel m;
  const std::string kind = io::get_field_or<std::string>(j, "kind", "none", ctx);
  if (kind == "none") {
    m.kind = ResModel::Kind::none;
  } else if (kind == "trace") {
    m.kind = ResModel::Kind::trace;
  } else if (kind == "bernoulli") {
    m.kind = ResModel::Kind::bernoulli;
    m.rate = io::get_field<double>(j, "rate", ctx);
    m.peak_kw = io::get_field<double>(j, "peak_kw", ctx);
  } else if (kind == "markov") {
    m.kind = ResModel::Kind::markov;
    m.levels = io::get_field<std::vector<double>>(j, "levels", ctx);
    m.transitions =
        io::get_field<std::vector<std::vector<std::vector<double>>>>(j, "transitions", ctx);
    m.initial_state = io::get_field_or<int>(j, "initial_state", 0, ctx);
    m.feature_of_slot =
        io::get_field_or<std::vector<int>>(j, "feature_of_slot", {}, ctx);
  } else {
    throw ConfigError(ctx + ": unknown generator kind '" + kind + "'");
  }
  return m;
}

inline ExperimentConfig parse_experiment_config(const json& j, const std::string& origin) {
  ExperimentConfig cfg;
  cfg.raw = j;
  cfg.slot_hours = io::get_field_or<double>(j, "slot_hours", 1.0, origin);
  cfg.seed = io::get_field_or<std::uint64_t>(j, "seed", 1, origin);

  if (j.contains("trace")) {
    const json& t = j.at("trace");
    if (t.contains("path")) {
      cfg.trace.is_file = true;
      cfg.trace.path = io::get_field<std::string>(t, "path", origin + ".trace");
    } else if (t.contains("synthetic")) {
      const json& s = t.at("synthetic");
      cfg.trace.synthetic = res_model_from_json(s, origin + ".trace.synthetic");
      cfg.trace.length = io::get_field<int>(s, "length", origin + ".trace.synthetic");
    } else {
      throw ConfigError(origin + ".trace: need 'path' or 'synthetic'");
    }
  }

  if (j.contains("tariff")) {
    const json& t = j.at("tariff");
    if (t.contains("path")) {
      cfg.tariff = io::read_tariff_json(io::get_field<std::string>(t, "path", origin));
      cfg.flat_tariff = false;
    } else if (t.contains("flat")) {
      cfg.flat_price = io::get_field<double>(t, "flat", origin + ".tariff");
      cfg.flat_tariff = true;
    } else if (t.contains("periods")) {
      cfg.tariff = io::tariff_from_json(t, origin + ".tariff");
      cfg.flat_tariff = false;
    } else {
      throw ConfigError(origin + ".tariff: need 'path', 'periods' or 'flat'");
    }
  }

  if (j.contains("battery")) {
    const json& b = j.at("battery");
    const std::string ctx = origin + ".battery";
    cfg.battery.b_max_kwh = io::get_field_or<double>(b, "b_max_kwh", 0.0, ctx);
    cfg.battery.p_charge_kw = io::get_field_or<double>(b, "p_charge_kw", 1e30, ctx);
    cfg.battery.p_discharge_kw = io::get_field_or<double>(b, "p_discharge_kw", 1e30, ctx);
    cfg.battery.eta_charge = io::get_field_or<double>(b, "eta_charge", 1.0, ctx);
    cfg.battery.eta_discharge = io::get_field_or<double>(b, "eta_discharge", 1.0, ctx);
    cfg.battery.b_initial_kwh =
        io::get_field_or<double>(b, "b_initial_kwh", cfg.battery.b_max_kwh / 2.0, ctx);
    cfg.battery.allow_sell = io::get_field_or<bool>(b, "allow_sell", false, ctx);
    try {
      cfg.battery.validate();
    } catch (const ModelError& e) {
      throw ConfigError(ctx + ": " + e.what());
    }
  }

  if (j.contains("res")) cfg.res = res_model_from_json(j.at("res"), origin + ".res");

  if (j.contains("policy")) {
    const json& p = j.at("policy");
    const std::string ctx = origin + ".policy";
    PolicySpec& ps = cfg.policy;
    ps.name = io::get_field<std::string>(p, "name", ctx);
    ps.alpha = io::get_field_or<double>(p, "alpha", 0.5, ctx);
    ps.wear_cost = io::get_field_or<double>(p, "c_b", 0.0, ctx);
    ps.beta_kw = io::get_field_or<double>(p, "beta", 0.5, ctx);
    ps.variant = io::get_field_or<std::string>(p, "variant", "hold", ctx);
    ps.ewma = io::get_field_or<double>(p, "ewma", 0.0, ctx);
    ps.h_future = io::get_field_or<int>(p, "h_f", 0, ctx);
    ps.h_past = io::get_field_or<int>(p, "h_p", 0, ctx);
    ps.target = io::get_field_or<std::string>(p, "target", "fixed", ctx);
    if (p.contains("w")) ps.w = io::get_field<double>(p, "w", ctx);
    ps.cutoff_hz = io::get_field_or<double>(p, "cutoff_hz", 1e-4, ctx);
    ps.level_guard = io::get_field_or<double>(p, "guard", 0.0, ctx);
    ps.p_peak = io::get_field_or<double>(p, "p_peak", 1e30, ctx);
    if (p.contains("channel")) ps.channel = p.at("channel");
  }

  cfg.metrics = io::get_field_or<std::vector<std::string>>(j, "metrics", {}, origin);
  cfg.edge_threshold = io::get_field_or<double>(j, "edge_threshold", 0.5, origin);

  if (j.contains("attacks")) {
    const json& arr = j.at("attacks");
    if (!arr.is_array()) throw ConfigError(origin + ".attacks: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string ctx = origin + ".attacks[" + std::to_string(i) + "]";
      AttackSpec a;
      a.name = io::get_field<std::string>(arr[i], "name", ctx);
      a.threshold = io::get_field_or<double>(arr[i], "threshold", 0.5, ctx);
      a.beta_kw = io::get_field_or<double>(arr[i], "beta", cfg.policy.beta_kw, ctx);
      cfg.attacks.push_back(a);
    }
  }

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    const std::string ctx = origin + ".sweep";
    cfg.sweep.axis = io::get_field<std::string>(s, "axis", ctx);
    cfg.sweep.values = io::get_field<std::vector<double>>(s, "values", ctx);
    if (cfg.sweep.values.empty()) throw ConfigError(ctx + ": empty sweep grid");
    for (std::size_t i = 1; i < cfg.sweep.values.size(); ++i)
      if (cfg.sweep.values[i] < cfg.sweep.values[i - 1])
        throw ConfigError(ctx + ": sweep grid must be sorted");
    if (cfg.sweep.axis != "alpha" && cfg.sweep.axis != "b_max" && cfg.sweep.axis != "p_e")
      throw ConfigError(ctx + ": unknown axis '" + cfg.sweep.axis + "'");
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(io::parse_json_file(path), path);
}

}  // namespace smp::harness
