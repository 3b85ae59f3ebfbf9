#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "smp/info.hpp"

namespace smp::info {

// Minimum leakage I(X;Y) over memoryless shaping channels whose support
// satisfies 0 <= x - y <= p_peak and whose average shaping power
// E[X - Y] stays within p_avg. The output alphabet is the input alphabet.
//
// Solved by alternating-minimization with a Lagrange multiplier on the
// average-power constraint; the multiplier is bisected until the budget
// is met, and the two bracketing channels are blended to land exactly on
// the budget (the leakage-vs-budget curve is convex, so the blend is
// optimal on linear segments where the bisection alone would overshoot).
struct PrivacyPowerResult {
  double leakage_bits = 0.0;
  ChannelMatrix channel;
  double avg_power = 0.0;   // achieved E[X - Y]
  double multiplier = 0.0;  // final Lagrange multiplier (nats per kW)
  std::vector<double> lagrangian_trace;  // inner objective per iteration, last run
};

namespace detail_pp {

struct Masked {
  std::vector<double> values;           // alphabet (inputs with positive mass)
  std::vector<double> px;
  std::vector<std::vector<char>> allow; // allow[i][j]: 0 <= v_i - v_j <= p_peak
  std::vector<std::vector<double>> d;   // distortion v_i - v_j
};

inline Masked build_mask(const Pmf& input, double p_peak) {
  if (p_peak < 0.0) throw ModelError("privacy power: empty feasible support (p_peak < 0)");
  Masked m;
  for (std::size_t i = 0; i < input.values.size(); ++i) {
    if (input.probs[i] <= 0.0) continue;
    m.values.push_back(input.values[i]);
    m.px.push_back(input.probs[i]);
  }
  const std::size_t n = m.values.size();
  m.allow.assign(n, std::vector<char>(n, 0));
  m.d.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      const double diff = m.values[i] - m.values[j];
      m.d[i][j] = diff;
      if (diff >= -1e-12 && diff <= p_peak + 1e-12) {
        m.allow[i][j] = 1;
        any = true;
      }
    }
    if (!any) throw ModelError("privacy power: input symbol with empty feasible support");
  }
  return m;
}

struct BaRun {
  std::vector<std::vector<double>> rows;
  double mi_nats = 0.0;
  double avg_power = 0.0;
  std::vector<double> lagrangian_trace;
};

// Alternating minimization of I + s*E[d] over the masked channel set.
inline BaRun ba_inner(const Masked& m, double s, int max_iters = 50000,
                      double tol = 1e-12) {
  const std::size_t n = m.values.size();
  BaRun run;
  run.rows.assign(n, std::vector<double>(n, 0.0));
  std::vector<double> q(n, 0.0);
  // start from the masked uniform channel
  for (std::size_t i = 0; i < n; ++i) {
    int cnt = 0;
    for (std::size_t j = 0; j < n; ++j) cnt += m.allow[i][j];
    for (std::size_t j = 0; j < n; ++j)
      run.rows[i][j] = m.allow[i][j] ? 1.0 / cnt : 0.0;
  }
  double prev = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iters; ++iter) {
    for (std::size_t j = 0; j < n; ++j) {
      q[j] = 0.0;
      for (std::size_t i = 0; i < n; ++i) q[j] += m.px[i] * run.rows[i][j];
    }
    double lagr = 0.0;  // nats
    for (std::size_t i = 0; i < n; ++i) {
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (m.allow[i][j]) {
          run.rows[i][j] = q[j] * std::exp(-s * m.d[i][j]);
          z += run.rows[i][j];
        } else {
          run.rows[i][j] = 0.0;
        }
      for (std::size_t j = 0; j < n; ++j) run.rows[i][j] /= z;
      lagr -= m.px[i] * std::log(z);
    }
    run.lagrangian_trace.push_back(lagr);
    if (std::fabs(prev - lagr) <= tol * (1.0 + std::fabs(lagr))) break;
    prev = lagr;
  }
  run.mi_nats = 0.0;
  run.avg_power = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    q[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) q[j] += m.px[i] * run.rows[i][j];
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double p = run.rows[i][j];
      if (p > 0.0) {
        run.mi_nats += m.px[i] * p * std::log(p / q[j]);
        run.avg_power += m.px[i] * p * m.d[i][j];
      }
    }
  return run;
}

inline double mi_bits_of(const Masked& m, const std::vector<std::vector<double>>& rows) {
  const std::size_t n = m.values.size();
  std::vector<double> q(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) q[j] += m.px[i] * rows[i][j];
  double mi = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (rows[i][j] > 0.0) mi += m.px[i] * rows[i][j] * std::log2(rows[i][j] / q[j]);
  return std::max(mi, 0.0);
}

inline double power_of(const Masked& m, const std::vector<std::vector<double>>& rows) {
  double p = 0.0;
  for (std::size_t i = 0; i < m.values.size(); ++i)
    for (std::size_t j = 0; j < m.values.size(); ++j)
      p += m.px[i] * rows[i][j] * m.d[i][j];
  return p;
}

// Rebuild a full-alphabet channel (zero-mass inputs map to themselves).
inline ChannelMatrix expand_channel(const Pmf& input,
                                    const std::vector<std::vector<double>>& rows) {
  ChannelMatrix ch;
  ch.in_values = input.values;
  ch.out_values = input.values;
  const std::size_t full = input.values.size();
  ch.rows.assign(full, std::vector<double>(full, 0.0));
  std::vector<int> pos(full, -1);
  {
    std::size_t k = 0;
    for (std::size_t i = 0; i < full; ++i)
      if (input.probs[i] > 0.0) pos[i] = int(k++);
  }
  for (std::size_t i = 0; i < full; ++i) {
    if (pos[i] < 0) {
      ch.rows[i][i] = 1.0;
      continue;
    }
    for (std::size_t j = 0; j < full; ++j)
      if (pos[j] >= 0) ch.rows[i][j] = rows[pos[i]][pos[j]];
  }
  return ch;
}

}  // namespace detail_pp

inline PrivacyPowerResult privacy_power_function(const Pmf& input, double p_avg,
                                                 double p_peak) {
  input.validate();
  const detail_pp::Masked m = detail_pp::build_mask(input, p_peak);
  const std::size_t n = m.values.size();

  PrivacyPowerResult res;

  // No shaping energy: the channel degenerates to the identity.
  if (p_avg <= 1e-15) {
    res.channel = ChannelMatrix::identity(input.values);
    res.leakage_bits = entropy_bits(m.px);
    res.avg_power = 0.0;
    res.multiplier = std::numeric_limits<double>::infinity();
    return res;
  }

  // If some constant output is reachable from every input within the
  // budget, the leakage is exactly zero.
  {
    double best = -1.0;
    double best_power = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      bool common = true;
      for (std::size_t i = 0; i < n; ++i) common = common && m.allow[i][j];
      if (!common) continue;
      double ed = 0.0;
      for (std::size_t i = 0; i < n; ++i) ed += m.px[i] * m.d[i][j];
      if (ed <= p_avg + 1e-15 && (best < 0.0 || ed < best_power)) {
        best = double(j);
        best_power = ed;
      }
    }
    if (best >= 0.0) {
      const std::size_t j = std::size_t(best);
      std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
      for (std::size_t i = 0; i < n; ++i) rows[i][j] = 1.0;
      res.channel = detail_pp::expand_channel(input, rows);
      res.leakage_bits = 0.0;
      res.avg_power = best_power;
      res.multiplier = 0.0;
      return res;
    }
  }

  // Multiplier search. E[d] is non-increasing in s, so bracket then bisect.
  detail_pp::BaRun lo = detail_pp::ba_inner(m, 0.0);
  if (lo.avg_power <= p_avg + 1e-12) {
    res.channel = detail_pp::expand_channel(input, lo.rows);
    res.leakage_bits = lo.mi_nats / kLog2;
    res.avg_power = lo.avg_power;
    res.multiplier = 0.0;
    res.lagrangian_trace = lo.lagrangian_trace;
    return res;
  }
  double s_lo = 0.0, s_hi = 1.0;
  detail_pp::BaRun hi = detail_pp::ba_inner(m, s_hi);
  int guard = 0;
  while (hi.avg_power > p_avg && guard++ < 80) {
    s_lo = s_hi;
    lo = hi;
    s_hi *= 2.0;
    hi = detail_pp::ba_inner(m, s_hi);
  }
  for (int iter = 0; iter < 60; ++iter) {
    const double s_mid = 0.5 * (s_lo + s_hi);
    detail_pp::BaRun mid = detail_pp::ba_inner(m, s_mid);
    if (mid.avg_power > p_avg) {
      s_lo = s_mid;
      lo = mid;
    } else {
      s_hi = s_mid;
      hi = mid;
    }
  }

  // Blend the bracketing channels to land exactly on the budget.
  std::vector<std::vector<double>> rows = hi.rows;
  const double pl = detail_pp::power_of(m, lo.rows);
  const double ph = detail_pp::power_of(m, hi.rows);
  if (pl > ph + 1e-15 && pl > p_avg && ph < p_avg) {
    const double theta = (p_avg - ph) / (pl - ph);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        rows[i][j] = theta * lo.rows[i][j] + (1.0 - theta) * hi.rows[i][j];
  }

  res.channel = detail_pp::expand_channel(input, rows);
  res.leakage_bits = detail_pp::mi_bits_of(m, rows);
  res.avg_power = detail_pp::power_of(m, rows);
  res.multiplier = 0.5 * (s_lo + s_hi);
  res.lagrangian_trace = hi.lagrangian_trace;
  return res;
}

// Independent check for small alphabets: exhaustive search over the
// feasible channel set on a nested grid. Because the objective is convex
// over the (convex) feasible set, refining around the best coarse point
// cannot miss the basin. Upper-bounds the true minimum within O(grid_res).
inline double channel_oracle_search(const Pmf& input, double p_avg, double p_peak,
                                    double grid_res = 1e-3) {
  input.validate();
  const detail_pp::Masked m = detail_pp::build_mask(input, p_peak);
  const std::size_t n = m.values.size();
  if (n > 3) throw ModelError("channel oracle: alphabet too large");
  if (n == 1) return 0.0;

  // Allowed outputs per row.
  std::vector<std::vector<int>> outs(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (m.allow[i][j]) outs[i].push_back(int(j));

  std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> best_rows(n, std::vector<double>(n, 0.0));
  // identity start (always feasible when p_avg >= 0)
  for (std::size_t i = 0; i < n; ++i) best_rows[i][i] = 1.0;
  double best = detail_pp::mi_bits_of(m, best_rows);

  // free coordinates: per row, |outs| - 1 entries in [0,1] (the last takes
  // the remainder)
  struct Free {
    int row, out;
  };
  std::vector<Free> coords;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k + 1 < outs[i].size(); ++k)
      coords.push_back({int(i), outs[i][k]});
  if (coords.empty()) return best;

  std::vector<double> center(coords.size(), 0.0), point(coords.size(), 0.0),
      best_point(coords.size(), 0.0);
  // identity center
  for (std::size_t c = 0; c < coords.size(); ++c)
    center[c] = (coords[c].row == coords[c].out) ? 1.0 : 0.0;
  best_point = center;

  auto evaluate_point = [&]() {
    for (auto& r : rows) std::fill(r.begin(), r.end(), 0.0);
    for (std::size_t k = 0; k < coords.size(); ++k)
      rows[coords[k].row][coords[k].out] = point[k];
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j + 1 < outs[i].size(); ++j) s += rows[i][outs[i][j]];
      if (s > 1.0 + 1e-12) return;  // remainder would be negative
      rows[i][outs[i].back()] = std::max(0.0, 1.0 - s);
    }
    if (detail_pp::power_of(m, rows) > p_avg + 1e-12) return;
    const double mi = detail_pp::mi_bits_of(m, rows);
    if (mi < best) {
      best = mi;
      best_rows = rows;
      best_point = point;
    }
  };

  // Pattern search: at each resolution, sweep a window around the current
  // best point and re-center until no improvement, then refine. The
  // objective is convex over a convex set, so this walks into the global
  // basin and the final resolution bounds the value gap.
  const bool coarse = coords.size() > 3;
  double res_level = coarse ? 0.125 : 1.0 / 64.0;
  bool full_sweep = true;
  while (true) {
    for (int pass = 0; pass < 50; ++pass) {
      const double before = best;
      std::function<void(std::size_t)> walk = [&](std::size_t c) {
        if (c == coords.size()) {
          evaluate_point();
          return;
        }
        const double lo = full_sweep ? 0.0 : std::max(0.0, center[c] - 2.0 * res_level);
        const double hi = full_sweep ? 1.0 : std::min(1.0, center[c] + 2.0 * res_level);
        for (double v = lo; v <= hi + 1e-12; v += res_level) {
          point[c] = std::min(v, 1.0);
          walk(c + 1);
        }
      };
      walk(0);
      center = best_point;
      full_sweep = false;
      if (before - best <= 1e-15) break;
    }
    if (res_level <= grid_res) break;
    res_level = std::max(grid_res, res_level / 4.0);
  }
  return best;
}

// Split a shared average-power budget across independent users so the
// total leakage is minimal: greedy marginal allocation on a budget grid
// (each per-user leakage curve is convex and non-increasing, so
// equalizing the finite-difference marginals is optimal on the grid).
struct MultiuserAllocation {
  std::vector<double> budgets;
  std::vector<double> leakage_bits;
  double total_bits = 0.0;
};

inline MultiuserAllocation multiuser_allocate(const std::vector<Pmf>& users,
                                              double total_budget, int grid_points = 200,
                                              double p_peak =
                                                  std::numeric_limits<double>::infinity()) {
  if (users.empty()) throw ModelError("multiuser: no users");
  if (total_budget < 0.0) throw ModelError("multiuser: negative budget");
  const int k = int(users.size());
  MultiuserAllocation out;
  out.budgets.assign(k, 0.0);
  out.leakage_bits.assign(k, 0.0);
  if (k == 1) {
    out.budgets[0] = total_budget;
    out.leakage_bits[0] = privacy_power_function(users[0], total_budget, p_peak).leakage_bits;
    out.total_bits = out.leakage_bits[0];
    return out;
  }

  const double delta = total_budget / grid_points;
  std::vector<std::vector<double>> curve(k);
  for (int i = 0; i < k; ++i) {
    curve[i].resize(grid_points + 1);
    for (int g = 0; g <= grid_points; ++g)
      curve[i][g] = privacy_power_function(users[i], g * delta, p_peak).leakage_bits;
  }

  std::vector<int> alloc(k, 0);
  for (int step = 0; step < grid_points; ++step) {
    int pick = -1;
    double best_gain = -1.0;
    for (int i = 0; i < k; ++i) {
      if (alloc[i] >= grid_points) continue;
      const double gain = curve[i][alloc[i]] - curve[i][alloc[i] + 1];
      if (gain > best_gain + 1e-15 ||
          (gain > best_gain - 1e-15 &&
           (pick < 0 || alloc[i] < alloc[pick]))) {
        best_gain = gain;
        pick = i;
      }
    }
    if (pick < 0) break;
    ++alloc[pick];
  }
  for (int i = 0; i < k; ++i) {
    out.budgets[i] = alloc[i] * delta;
    out.leakage_bits[i] = curve[i][alloc[i]];
    out.total_bits += out.leakage_bits[i];
  }
  return out;
}

}  // namespace smp::info
