#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "smp/errors.hpp"
#include "smp/info.hpp"
#include "smp/rng.hpp"

namespace smp::info {

// Finite-state shaping model over integer energy units: a battery with
// levels {0..b_max}, input load X in {0..x_card-1}, grid load Y in
// {0..y_card-1}, and a stochastic decision rule p(y | x, b). The battery
// follows b' = min(b + y - x, b_max); charging past capacity spills,
// discharging below empty is infeasible, so the rule may only place mass
// on y >= x - b.
struct FsmModel {
  int b_max = 0;
  int b_init = 0;
  int x_card = 2;
  int y_card = 2;
  std::vector<double> x_init;                  // initial / i.i.d. law
  std::vector<std::vector<double>> x_markov;   // empty = i.i.d.
  std::vector<std::vector<std::vector<double>>> rule;  // [b][x][y]

  bool markov() const { return !x_markov.empty(); }

  int next_level(int b, int x, int y) const { return std::min(b + y - x, b_max); }
  bool feasible(int b, int x, int y) const { return b + y - x >= 0; }

  void validate() const {
    if (b_max < 0 || b_init < 0 || b_init > b_max)
      throw ModelError("fsm: bad battery range");
    if (x_card < 1 || y_card < 1) throw ModelError("fsm: empty alphabet");
    if (int(x_init.size()) != x_card) throw ModelError("fsm: initial law size mismatch");
    double s = 0.0;
    for (double p : x_init) {
      if (p < 0.0) throw ModelError("fsm: negative probability in initial law");
      s += p;
    }
    if (std::fabs(s - 1.0) > 1e-9) throw ModelError("fsm: initial law does not sum to 1");
    if (markov()) {
      if (int(x_markov.size()) != x_card) throw ModelError("fsm: markov size mismatch");
      for (const auto& row : x_markov) {
        if (int(row.size()) != x_card) throw ModelError("fsm: markov row size mismatch");
        double rs = 0.0;
        for (double p : row) {
          if (p < 0.0) throw ModelError("fsm: negative markov entry");
          rs += p;
        }
        if (std::fabs(rs - 1.0) > 1e-9) throw ModelError("fsm: markov row does not sum to 1");
      }
    }
    if (int(rule.size()) != b_max + 1) throw ModelError("fsm: rule depth mismatch");
    for (int b = 0; b <= b_max; ++b) {
      if (int(rule[b].size()) != x_card) throw ModelError("fsm: rule x-size mismatch");
      for (int x = 0; x < x_card; ++x) {
        if (int(rule[b][x].size()) != y_card)
          throw ModelError("fsm: rule y-size mismatch");
        double rs = 0.0;
        for (int y = 0; y < y_card; ++y) {
          const double p = rule[b][x][y];
          if (p < 0.0) throw ModelError("fsm: negative rule entry");
          if (p > 0.0 && !feasible(b, x, y))
            throw ModelError("fsm: rule places mass on an infeasible grid load (b=" +
                             std::to_string(b) + ", x=" + std::to_string(x) +
                             ", y=" + std::to_string(y) + ")");
          rs += p;
        }
        if (std::fabs(rs - 1.0) > 1e-9)
          throw ModelError("fsm: rule row does not sum to 1");
      }
    }
  }

  std::pair<std::vector<int>, std::vector<int>> sample(int n, std::uint64_t seed) const {
    validate();
    Rng rng(seed);
    auto draw = [&](const std::vector<double>& p) {
      const double u = rng.next_double();
      double acc = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return int(i);
      }
      return int(p.size()) - 1;
    };
    std::vector<int> xs(n), ys(n);
    int b = b_init;
    int xprev = -1;
    for (int t = 0; t < n; ++t) {
      const int x = (t == 0 || !markov()) ? draw(x_init) : draw(x_markov[xprev]);
      const int y = draw(rule[b][x]);
      xs[t] = x;
      ys[t] = y;
      b = next_level(b, x, y);
      xprev = x;
    }
    return {xs, ys};
  }

  double log2_px(const std::vector<int>& xs) const {
    double lp = 0.0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
      const double p = (t == 0 || !markov()) ? x_init[xs[t]] : x_markov[xs[t - 1]][xs[t]];
      if (p <= 0.0)
        throw ModelError("fsm: impossible input at slot " + std::to_string(t));
      lp += std::log2(p);
    }
    return lp;
  }

  // log2 p(x^n, y^n): the battery path is deterministic given the pair.
  double log2_pxy(const std::vector<int>& xs, const std::vector<int>& ys) const {
    double lp = log2_px(xs);
    int b = b_init;
    for (std::size_t t = 0; t < xs.size(); ++t) {
      if (!feasible(b, xs[t], ys[t]))
        throw ModelError("fsm: infeasible observation at slot " + std::to_string(t));
      const double p = rule[b][xs[t]][ys[t]];
      if (p <= 0.0)
        throw ModelError("fsm: zero-probability observation at slot " + std::to_string(t));
      lp += std::log2(p);
      b = next_level(b, xs[t], ys[t]);
    }
    return lp;
  }

  // log2 p(y^n) by a scaled forward recursion over (battery level, last
  // input). Scaling per step keeps the recursion stable for n up to 1e6.
  double log2_py(const std::vector<int>& ys) const {
    const int nb = b_max + 1;
    std::vector<double> alpha(std::size_t(nb) * x_card, 0.0), next(alpha.size(), 0.0);
    double log_p = 0.0;

    // first slot: battery starts at b_init
    for (int x = 0; x < x_card; ++x) {
      if (!feasible(b_init, x, ys[0])) continue;
      const double w = x_init[x] * rule[b_init][x][ys[0]];
      if (w > 0.0) alpha[std::size_t(next_level(b_init, x, ys[0])) * x_card + x] += w;
    }
    double norm = 0.0;
    for (double v : alpha) norm += v;
    if (norm <= 0.0)
      throw ModelError("fsm: zero-probability observation at slot 0");
    for (double& v : alpha) v /= norm;
    log_p += std::log2(norm);

    for (std::size_t t = 1; t < ys.size(); ++t) {
      std::fill(next.begin(), next.end(), 0.0);
      const int y = ys[t];
      for (int b = 0; b < nb; ++b)
        for (int xp = 0; xp < x_card; ++xp) {
          const double a = alpha[std::size_t(b) * x_card + xp];
          if (a <= 0.0) continue;
          for (int x = 0; x < x_card; ++x) {
            const double px = markov() ? x_markov[xp][x] : x_init[x];
            if (px <= 0.0 || !feasible(b, x, y)) continue;
            const double w = a * px * rule[b][x][y];
            if (w > 0.0) next[std::size_t(next_level(b, x, y)) * x_card + x] += w;
          }
        }
      norm = 0.0;
      for (double v : next) norm += v;
      if (norm <= 0.0)
        throw ModelError("fsm: zero-probability observation at slot " + std::to_string(t));
      for (double& v : next) v /= norm;
      log_p += std::log2(norm);
      alpha.swap(next);
    }
    return log_p;
  }
};

// Leakage-rate estimate for sampled sequences under a known finite-state
// model: (1/n) [ log p(x^n, y^n) - log p(x^n) - log p(y^n) ].
inline double empirical_mi_fsm_bits(const std::vector<int>& xs, const std::vector<int>& ys,
                                    const FsmModel& model) {
  if (xs.size() != ys.size() || xs.empty())
    throw ModelError("fsm mi: empty or mismatched sequences");
  model.validate();
  const double n = double(xs.size());
  return (model.log2_pxy(xs, ys) - model.log2_px(xs) - model.log2_py(ys)) / n;
}

// Exact leakage of a shaping rule over a short horizon by exhausting all
// sequence pairs. Returns both the block leakage rate (1/n) I(X^n;Y^n)
// (the initial level is deterministic here) and the per-slot conditional
// sum (1/n) sum_t I(X_t,B_t;Y_t | Y^{t-1}); the former always dominates
// the latter.
struct LeakageReport {
  double total_rate_bits = 0.0;
  double per_slot_sum_bits = 0.0;
  std::vector<double> per_slot_bits;
};

inline LeakageReport exact_leakage_small_n(const FsmModel& model, int n) {
  model.validate();
  if (n < 1 || n > 4) throw ModelError("exact leakage: horizon must be in [1,4]");
  double states = 1.0;
  for (int t = 0; t < n; ++t) states *= double(model.x_card) * double(model.y_card);
  if (states > 1e7) throw ModelError("exact leakage: state space too large");

  const int nx = model.x_card, ny = model.y_card;
  auto pow_int = [](int base, int e) {
    long long v = 1;
    for (int i = 0; i < e; ++i) v *= base;
    return v;
  };
  const long long nxs = pow_int(nx, n), nys = pow_int(ny, n);

  std::vector<std::vector<double>> joint(std::size_t(nxs),
                                         std::vector<double>(std::size_t(nys), 0.0));
  // per-slot tallies: key = (y-prefix code, x_t, b_t, y_t)
  struct SlotTally {
    std::map<long long, std::map<std::pair<int, int>, std::map<int, double>>> by_prefix;
  };
  std::vector<SlotTally> slots(n);

  std::vector<int> xs(n), ys(n);
  for (long long xi = 0; xi < nxs; ++xi) {
    long long rem = xi;
    for (int t = n - 1; t >= 0; --t) {
      xs[t] = int(rem % nx);
      rem /= nx;
    }
    double px = 1.0;
    for (int t = 0; t < n && px > 0.0; ++t)
      px *= (t == 0 || !model.markov()) ? model.x_init[xs[t]]
                                        : model.x_markov[xs[t - 1]][xs[t]];
    if (px <= 0.0) continue;

    for (long long yi = 0; yi < nys; ++yi) {
      rem = yi;
      for (int t = n - 1; t >= 0; --t) {
        ys[t] = int(rem % ny);
        rem /= ny;
      }
      double p = px;
      int b = model.b_init;
      std::vector<int> bpath(n);
      for (int t = 0; t < n && p > 0.0; ++t) {
        bpath[t] = b;
        if (!model.feasible(b, xs[t], ys[t])) {
          p = 0.0;
          break;
        }
        p *= model.rule[b][xs[t]][ys[t]];
        b = model.next_level(b, xs[t], ys[t]);
      }
      if (p <= 0.0) continue;
      joint[std::size_t(xi)][std::size_t(yi)] += p;
      long long prefix = 0;
      for (int t = 0; t < n; ++t) {
        slots[t].by_prefix[prefix][{xs[t], bpath[t]}][ys[t]] += p;
        prefix = prefix * ny + ys[t];
      }
    }
  }

  LeakageReport rep;
  rep.total_rate_bits = mutual_information_bits(joint) / double(n);

  for (int t = 0; t < n; ++t) {
    double it = 0.0;
    for (const auto& [prefix, table] : slots[t].by_prefix) {
      double p_prefix = 0.0;
      for (const auto& [xb, row] : table)
        for (const auto& [y, p] : row) p_prefix += p;
      if (p_prefix <= 0.0) continue;
      // conditional joint over ((x,b), y)
      std::map<std::pair<int, int>, int> xb_index;
      for (const auto& [xb, row] : table)
        if (!xb_index.count(xb)) xb_index.emplace(xb, int(xb_index.size()));
      std::vector<std::vector<double>> cj(xb_index.size(), std::vector<double>(ny, 0.0));
      for (const auto& [xb, row] : table)
        for (const auto& [y, p] : row) cj[xb_index[xb]][y] += p / p_prefix;
      it += p_prefix * mutual_information_bits(cj);
    }
    rep.per_slot_bits.push_back(it);
    rep.per_slot_sum_bits += it / double(n);
  }

  if (rep.total_rate_bits < rep.per_slot_sum_bits - 1e-9)
    throw ModelError("exact leakage: decomposition inequality violated");
  return rep;
}

// Leakage-rate upper bound from the ball-exchange view of a battery of
// b_max units facing loads of at most x_max units.
inline double trapdoor_bound_bits(int b_max_units, int x_max_units) {
  if (x_max_units <= 0) throw ModelError("trapdoor bound: x_max must be positive");
  if (b_max_units < 0) throw ModelError("trapdoor bound: negative battery size");
  const long long k = (static_cast<long long>(b_max_units) + 1) / x_max_units;
  if (k == 0) return std::numeric_limits<double>::infinity();
  return 1.0 / double(k);
}

// Random shaping rule with feasible support (handy for property tests).
inline FsmModel random_feasible_fsm(int b_max, int x_card, int y_card, int b_init,
                                    std::uint64_t seed) {
  FsmModel m;
  m.b_max = b_max;
  m.b_init = b_init;
  m.x_card = x_card;
  m.y_card = y_card;
  m.x_init.assign(std::size_t(x_card), 1.0 / x_card);
  m.rule.assign(std::size_t(b_max) + 1,
                std::vector<std::vector<double>>(std::size_t(x_card),
                                                 std::vector<double>(std::size_t(y_card), 0.0)));
  Rng rng(seed);
  for (int b = 0; b <= b_max; ++b)
    for (int x = 0; x < x_card; ++x) {
      double sum = 0.0;
      for (int y = 0; y < y_card; ++y)
        if (m.feasible(b, x, y)) {
          m.rule[b][x][y] = rng.exponential(1.0) + 1e-6;
          sum += m.rule[b][x][y];
        }
      for (int y = 0; y < y_card; ++y) m.rule[b][x][y] /= sum;
    }
  return m;
}

}  // namespace smp::info
