#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "smp/attacks.hpp"
#include "smp/config.hpp"
#include "smp/evaluate.hpp"
#include "smp/heuristics.hpp"
#include "smp/hypothesis.hpp"
#include "smp/info.hpp"
#include "smp/io.hpp"
#include "smp/mdp.hpp"
#include "smp/policies.hpp"
#include "smp/privacy_power.hpp"
#include "smp/simulate.hpp"
#include "smp/smdm.hpp"

namespace smp::harness {

inline int log_level() {
  const char* env = std::getenv("SMPLAB_LOG");
  if (env == nullptr) return 1;
  const std::string v(env);
  if (v == "quiet") return 0;
  if (v == "debug") return 2;
  return 1;
}

inline void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[smplab] " << msg << "\n";
}

struct RunOutput {
  std::vector<io::Record> records;
  bool any_infeasible = false;
};

namespace detail_h {

struct PolicyOutcome {
  GridTrace grid;
  TargetProfile target;
  bool feasible = true;
  std::string note;
};

inline PolicyOutcome run_policy(const ExperimentConfig& cfg, const LoadTrace& trace,
                                const TariffSchedule& tariff, std::uint64_t seed) {
  const PolicySpec& ps = cfg.policy;
  PolicyOutcome out;
  out.target = TargetProfile::constant(ps.w.value_or(trace.mean_load()));
  policies::PolicyWeights weights{ps.alpha, ps.wear_cost};
  ResModel traced;
  traced.kind = trace.has_res() ? ResModel::Kind::trace : ResModel::Kind::none;

  try {
    if (ps.name == "passthrough") {
      out.grid.y_kw = trace.load_kw;
    } else if (ps.name == "best_effort") {
      out.grid = policies::best_effort_policy(trace, cfg.battery).grid;
    } else if (ps.name == "stepping") {
      policies::SteppingSpec st;
      st.beta_kw = ps.beta_kw;
      st.ewma = ps.ewma;
      if (ps.variant == "hold")
        st.variant = policies::SteppingSpec::Variant::hold;
      else if (ps.variant == "charge_greedy")
        st.variant = policies::SteppingSpec::Variant::charge_greedy;
      else if (ps.variant == "random")
        st.variant = policies::SteppingSpec::Variant::random;
      else
        throw ConfigError("policy: unknown stepping variant '" + ps.variant + "'");
      out.grid = policies::stepping_policy(trace, cfg.battery, st, seed).grid;
    } else if (ps.name == "myopic") {
      out.grid = policies::myopic_online_policy(trace, tariff, cfg.battery, weights, ps.w,
                                                ps.level_guard);
    } else if (ps.name == "offline_constant") {
      auto sol = policies::solve_offline_constant_target(trace, tariff, cfg.battery,
                                                         weights, ps.w);
      out.feasible = sol.feasible;
      out.note = sol.infeasibility;
      out.grid = sol.grid;
      out.target = sol.target;
    } else if (ps.name == "offline_piecewise") {
      auto sol = policies::solve_piecewise_target(trace, tariff, cfg.battery, weights);
      out.feasible = sol.feasible;
      out.note = sol.infeasibility;
      out.grid = sol.grid;
      out.target = sol.target;
    } else if (ps.name == "receding") {
      policies::TargetMode mode = policies::TargetMode::fixed;
      if (ps.target == "joint")
        mode = policies::TargetMode::joint;
      else if (ps.target == "filtered")
        mode = policies::TargetMode::filtered;
      else if (ps.target != "fixed")
        throw ConfigError("policy: unknown receding target mode '" + ps.target + "'");
      auto sol = policies::solve_receding_horizon(
          trace, tariff, cfg.battery, weights,
          policies::HorizonSpec{ps.h_future, ps.h_past}, mode, ps.w, ps.cutoff_hz);
      out.feasible = sol.feasible;
      out.note = sol.infeasibility;
      out.grid = sol.grid;
      if (sol.feasible && mode != policies::TargetMode::fixed)
        out.target = TargetProfile::series(sol.committed_targets);
    } else if (ps.name == "channel") {
      if (ps.channel.is_null())
        throw ConfigError("policy: stochastic policy needs a 'channel' block");
      const auto ch = io::channel_from_json(ps.channel, "policy.channel");
      out.grid = policies::memoryless_channel_policy(trace, ch, ps.p_peak, seed);
    } else {
      throw ConfigError("policy: unknown policy '" + ps.name + "'");
    }
  } catch (const FeasibilityError& e) {
    out.feasible = false;
    out.note = e.what();
  }
  return out;
}

inline void append_metrics(io::Record& rec, const ExperimentConfig& cfg,
                           const LoadTrace& trace, const TariffSchedule& tariff,
                           const GridTrace& grid) {
  const auto xq = info::quantize_series(trace.load_kw, 1e-6);
  const auto yq = info::quantize_series(grid.y_kw, 1e-6);
  for (const auto& m : cfg.metrics) {
    if (m == "mi_plugin") {
      rec.add("mi_plugin_bits", info::empirical_mi_plugin_bits(xq.idx, yq.idx, false));
    } else if (m == "mi_normalized") {
      rec.add("mi_normalized", info::empirical_mi_plugin_bits(xq.idx, yq.idx, true));
    } else if (m == "cond_entropy") {
      const auto cq = info::quantize_series(tariff.per_slot(trace.size()), 1e-9);
      rec.add("cond_entropy_bits",
              info::conditional_entropy_rate_bits(xq.idx, yq.idx, cq.idx));
    } else if (m == "rel_entropy") {
      rec.add("rel_entropy_bits",
              info::empirical_relative_entropy_bits(trace.load_kw, grid.y_kw, 16));
    } else if (m == "crosscorr") {
      const int max_lag = std::max(1, std::min(trace.size() / 4, 48));
      const auto a = info::max_crosscorr_alignment(trace.load_kw, grid.y_kw, max_lag);
      rec.add("crosscorr_lag", a.defined ? a.lag : 0);
      rec.add("crosscorr", a.defined ? a.correlation : 0.0);
      rec.add("crosscorr_defined", a.defined);
    } else if (m == "edge_count") {
      rec.add("edge_count",
              (long long)attacks::edge_detector(grid.y_kw, cfg.edge_threshold).size());
    } else {
      throw ConfigError("metrics: unknown metric '" + m + "'");
    }
  }
}

inline void append_attacks(io::Record& rec, const ExperimentConfig& cfg,
                           const LoadTrace& trace, const GridTrace& grid) {
  for (const auto& a : cfg.attacks) {
    if (a.name == "edge") {
      const auto events = attacks::edge_detector(grid.y_kw, a.threshold);
      const auto truth = attacks::edge_detector(trace.load_kw, a.threshold);
      rec.add("attack_edge_events", (long long)events.size());
      rec.add("attack_edge_truth", (long long)truth.size());
    } else if (a.name == "peak") {
      // ground truth: starts of the top-level runs of the quantized demand
      std::vector<double> xg(trace.load_kw.size());
      for (std::size_t t = 0; t < xg.size(); ++t)
        xg[t] = std::round(trace.load_kw[t] / a.beta_kw) * a.beta_kw;
      const auto truth = attacks::peak_recovery(xg, a.beta_kw);
      try {
        const auto found = attacks::peak_recovery(grid.y_kw, a.beta_kw);
        const auto score = attacks::score_candidates(found.candidates, truth.candidates, 1);
        rec.add("attack_peak_recall", score.recall);
        rec.add("attack_peak_precision", score.precision);
      } catch (const ModelError&) {
        rec.add("attack_peak_recall", std::string("off-grid"));
      }
    } else {
      throw ConfigError("attacks: unknown attack '" + a.name + "'");
    }
  }
}

}  // namespace detail_h

// Resolve the base trace of a config (synthetic traces are seeded from the
// experiment seed).
inline LoadTrace resolve_trace(const ExperimentConfig& cfg) {
  if (cfg.trace.is_file) return io::read_trace_csv(cfg.trace.path, cfg.slot_hours);
  if (cfg.trace.length <= 0)
    throw ConfigError("config: no trace source (need trace.path or trace.synthetic)");
  return generate_synthetic_trace(cfg.trace.synthetic, cfg.trace.length, cfg.slot_hours,
                                  derive_seed(cfg.seed, 0x70ace));
}

// One record per sweep point (or a single record when no sweep is set).
// Points run concurrently on isolated RNG streams; the collector keeps
// sweep order, so output is bit-reproducible for a fixed config and seed.
// Infeasible points are reported and the run continues.
inline RunOutput run(const ExperimentConfig& cfg) {
  RunOutput out;
  LoadTrace base = resolve_trace(cfg);
  const TariffSchedule tariff = cfg.flat_tariff
                                    ? TariffSchedule::flat(cfg.flat_price, base.size())
                                    : cfg.tariff;
  tariff.validate(base.size());

  std::vector<std::pair<std::string, double>> points;
  if (cfg.sweep.axis == "none" || cfg.sweep.values.empty())
    points.emplace_back("none", 0.0);
  else
    for (double v : cfg.sweep.values) points.emplace_back(cfg.sweep.axis, v);

  const std::size_t n_points = points.size();
  std::vector<io::Record> records(n_points);
  std::vector<char> infeasible(n_points, 0);

  auto run_point = [&](std::size_t i) {
    ExperimentConfig point_cfg = cfg;
    const auto& [axis, value] = points[i];
    if (axis == "alpha") point_cfg.policy.alpha = value;
    if (axis == "b_max") {
      point_cfg.battery.b_max_kwh = value;
      point_cfg.battery.b_initial_kwh = std::min(cfg.battery.b_initial_kwh, value);
    }
    if (axis == "p_e") point_cfg.res.rate = value;

    const std::uint64_t point_seed = derive_seed(cfg.seed, i + 1);
    LoadTrace trace = base;
    if (point_cfg.res.kind != ResModel::Kind::none) {
      trace.res_kw = point_cfg.res.generate(trace.size(), &base, point_seed);
    }

    io::Record rec;
    if (axis != "none") rec.add(axis, value);
    rec.add("policy", point_cfg.policy.name);
    auto outcome = detail_h::run_policy(point_cfg, trace, tariff, point_seed);
    rec.add("feasible", outcome.feasible);
    if (!outcome.feasible) {
      rec.add("note", outcome.note);
      infeasible[i] = 1;
      records[i] = std::move(rec);
      return;
    }

    const RunReport report = evaluate(outcome.grid, trace, tariff, outcome.target);
    rec.add("v_t", report.variance_kw2);
    rec.add("c_t", report.cost);

    // independent feasibility re-validation of whatever the policy emitted
    ResModel traced;
    traced.kind = trace.has_res() ? ResModel::Kind::trace : ResModel::Kind::none;
    const auto violations =
        validate_grid(outcome.grid, trace, point_cfg.battery, traced, point_seed);
    rec.add("violations", (long long)violations.size());
    if (!violations.empty()) {
      infeasible[i] = 1;
      rec.add("note", violations.front().describe());
    }

    detail_h::append_metrics(rec, point_cfg, trace, tariff, outcome.grid);
    detail_h::append_attacks(rec, point_cfg, trace, outcome.grid);
    records[i] = std::move(rec);
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(
                                            std::thread::hardware_concurrency(),
                                            unsigned(n_points)));
  if (workers <= 1 || n_points <= 1) {
    for (std::size_t i = 0; i < n_points; ++i) run_point(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= n_points) return;
          try {
            run_point(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  for (std::size_t i = 0; i < n_points; ++i) {
    out.any_infeasible = out.any_infeasible || infeasible[i];
    out.records.push_back(std::move(records[i]));
  }
  log_debug(std::to_string(n_points) + " sweep points done");
  return out;
}

// ---- leakage-vs-renewable-rate sweep ------------------------------------------

struct PeSweepConfig {
  std::vector<int> x_levels{0, 1, 2, 3, 4};
  std::vector<double> x_probs;  // empty = uniform
  int e_peak = 4;
  int p_hat = 4;
  std::vector<int> b_max_grid{0, 1, 2};
  std::vector<double> p_e_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  int length = 100000;
  std::uint64_t seed = 1;
};

inline PeSweepConfig pe_sweep_from_json(const json& j, const std::string& ctx) {
  PeSweepConfig c;
  c.x_levels = io::get_field_or<std::vector<int>>(j, "x_levels", c.x_levels, ctx);
  c.x_probs = io::get_field_or<std::vector<double>>(j, "x_probs", {}, ctx);
  c.e_peak = io::get_field_or<int>(j, "e_peak", c.e_peak, ctx);
  c.p_hat = io::get_field_or<int>(j, "p_hat", c.p_hat, ctx);
  c.b_max_grid = io::get_field_or<std::vector<int>>(j, "b_max", c.b_max_grid, ctx);
  c.p_e_grid = io::get_field_or<std::vector<double>>(j, "p_e", c.p_e_grid, ctx);
  c.length = io::get_field_or<int>(j, "length", c.length, ctx);
  c.seed = io::get_field_or<std::uint64_t>(j, "seed", c.seed, ctx);
  return c;
}

// Leakage of a greedy use-everything-available shaping rule over integer
// alphabets, swept over the renewable generation rate and battery size.
// Sweep points share random numbers: the demand sequence is common to all
// points and the renewable draws are coupled through shared uniforms, so
// higher p_e means pointwise more renewable energy.
inline RunOutput sweep_pe(const PeSweepConfig& cfg) {
  if (cfg.length < 1) throw ConfigError("pe sweep: empty horizon");
  for (int x : cfg.x_levels)
    if (x < 0) throw ConfigError("pe sweep: negative load level");

  Rng xrng(derive_seed(cfg.seed, 1));
  Rng erng(derive_seed(cfg.seed, 2));
  const int n = cfg.length;
  const int nx = int(cfg.x_levels.size());
  std::vector<double> probs = cfg.x_probs;
  if (probs.empty()) probs.assign(nx, 1.0 / nx);
  if (int(probs.size()) != nx) throw ConfigError("pe sweep: x_probs size mismatch");

  std::vector<int> x(n);
  for (int t = 0; t < n; ++t) {
    const double u = xrng.next_double();
    double acc = 0.0;
    int pick = nx - 1;
    for (int i = 0; i < nx; ++i) {
      acc += probs[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    x[t] = cfg.x_levels[pick];
  }
  std::vector<double> eu(n);
  for (double& u : eu) u = erng.next_double();

  RunOutput out;
  for (int b_max : cfg.b_max_grid) {
    for (double pe : cfg.p_e_grid) {
      std::vector<int> y(n);
      int b = 0;
      for (int t = 0; t < n; ++t) {
        const int e = eu[t] < pe ? cfg.e_peak : 0;
        const int avail = b + e;
        const int use = std::min({x[t], avail, cfg.p_hat});
        y[t] = x[t] - use;
        b = std::min(avail - use, b_max);
      }
      std::vector<int> yi(y.begin(), y.end());
      io::Record rec;
      rec.add("b_max", (long long)b_max);
      rec.add("p_e", pe);
      rec.add("leakage_bits", info::empirical_mi_plugin_bits(x, yi, false));
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

// ---- privacy-power sweeps and detection experiments -----------------------------

inline RunOutput run_ba(const json& block, const std::string& ctx) {
  const auto pmf = io::pmf_from_json(block.at("pmf"), ctx + ".pmf");
  const double p_peak = io::get_field_or<double>(block, "p_peak", pmf.max_value(), ctx);
  const auto budgets = io::get_field<std::vector<double>>(block, "budgets", ctx);
  const bool with_oracle = io::get_field_or<bool>(block, "oracle", false, ctx);
  RunOutput out;
  for (double b : budgets) {
    io::Record rec;
    rec.add("p_avg", b);
    rec.add("p_peak", p_peak);
    const auto r = info::privacy_power_function(pmf, b, p_peak);
    rec.add("leakage_bits", r.leakage_bits);
    rec.add("achieved_power", r.avg_power);
    if (with_oracle)
      rec.add("oracle_bits", info::channel_oracle_search(pmf, b, p_peak, 1e-3));
    out.records.push_back(std::move(rec));
  }
  return out;
}

inline RunOutput run_attack_exponents(const json& block, const std::string& ctx) {
  info::HypothesisModel hyp;
  hyp.load_h0 = io::pmf_from_json(block.at("h0"), ctx + ".h0");
  hyp.load_h1 = io::pmf_from_json(block.at("h1"), ctx + ".h1");
  hyp.res_budget = io::get_field_or<double>(block, "budget", 0.0, ctx);
  const double p_peak = io::get_field_or<double>(block, "p_peak", hyp.load_h0.max_value(), ctx);
  const int n = io::get_field_or<int>(block, "n", 1000, ctx);
  const int trials = io::get_field_or<int>(block, "trials", 1000, ctx);
  const double cap = io::get_field_or<double>(block, "p1_cap", 0.05, ctx);
  const std::uint64_t seed = io::get_field_or<std::uint64_t>(block, "seed", 1, ctx);
  const std::string emp = io::get_field_or<std::string>(block, "emp", "raw", ctx);

  info::ChannelMatrix q0 = info::ChannelMatrix::identity(hyp.load_h0.values);
  info::ChannelMatrix q1 = q0;
  double d_star = info::kl_divergence_bits(hyp.load_h0, hyp.load_h1);
  if (emp == "min_kl") {
    const auto r = info::min_kl_channel(hyp, p_peak);
    q0 = r.channel_h0;
    q1 = r.channel_h1;
    d_star = r.divergence_bits;
  } else if (emp != "raw") {
    throw ConfigError(ctx + ": unknown emp '" + emp + "'");
  }

  const auto rep = attacks::estimate_error_exponents(hyp, q0, q1, n, trials, cap, seed);
  RunOutput out;
  io::Record rec;
  rec.add("emp", emp);
  rec.add("n", (long long)n);
  rec.add("trials", (long long)trials);
  rec.add("p1", rep.type1);
  rec.add("p2", rep.type2);
  rec.add("exponent_bits", rep.exponent_bits);
  rec.add("ci_low_bits", rep.ci_low_bits);
  rec.add("ci_high_bits", rep.ci_high_bits);
  rec.add("divergence_bits", d_star);
  out.records.push_back(std::move(rec));
  return out;
}

// Masked, differentially-private aggregation of one metering group:
// {group_id, slot, total_kw} records.
inline RunOutput run_aggregation(const json& block, const LoadTrace& trace,
                                 const std::string& ctx) {
  const int meters = io::get_field_or<int>(block, "meters", 10, ctx);
  const double lambda = io::get_field_or<double>(block, "lambda", 1.0, ctx);
  const double mask_range = io::get_field_or<double>(block, "mask_range_kw", 1.0, ctx);
  const std::uint64_t seed = io::get_field_or<std::uint64_t>(block, "seed", 1, ctx);
  const int group_id = io::get_field_or<int>(block, "group_id", 0, ctx);

  smdm::DpSpec dp;
  dp.lambda = lambda;
  dp.group_size = meters;
  dp.validate();

  // each meter reports the base trace plus its own DP noise, masked
  std::vector<std::vector<double>> noisy(meters);
  for (int m = 0; m < meters; ++m)
    noisy[m] = smdm::obfuscate_series(trace.load_kw, dp, seed, std::uint64_t(m));

  RunOutput out;
  for (int t = 0; t < trace.size(); ++t) {
    const auto masks = smdm::zero_sum_masks(meters, mask_range, derive_seed(seed, 1000 + t));
    std::vector<double> readings(meters);
    for (int m = 0; m < meters; ++m) readings[m] = noisy[m][t];
    io::Record rec;
    rec.add("group_id", (long long)group_id);
    rec.add("slot", (long long)t);
    rec.add("total_kw", smdm::aggregate_masked(readings, masks));
    out.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace smp::harness
