#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "smp/info.hpp"
#include "smp/rng.hpp"

namespace smp::info {

// Binary activity-detection setting: the load is i.i.d. with a different
// law under each hypothesis, the shaping policy may depend on the true
// hypothesis, and the adversary observes the induced output law.
struct HypothesisModel {
  Pmf load_h0;
  Pmf load_h1;
  double res_budget = 0.0;  // average shaping power available per slot

  void validate() const {
    load_h0.validate();
    load_h1.validate();
    if (load_h0.values != load_h1.values)
      throw ModelError("hypothesis: supports differ");
    if (res_budget < 0.0) throw ModelError("hypothesis: negative budget");
  }
};

struct MinKlResult {
  ChannelMatrix channel_h0;
  ChannelMatrix channel_h1;
  double divergence_bits = 0.0;
};

namespace detail_hyp {

// Euclidean projection of the active coordinates onto the simplex.
inline void project_simplex(std::vector<double>& v) {
  const int n = int(v.size());
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, theta = 0.0;
  for (int i = 0; i < n; ++i) {
    css += u[i];
    const double t = (css - 1.0) / (i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  for (double& x : v) x = std::max(0.0, x - theta);
}

struct PairState {
  std::vector<std::vector<double>> q0, q1;  // masked channel rows
};

}  // namespace detail_hyp

// Minimize D(p_Y|h0 || p_Y|h1) over channel pairs that satisfy
// 0 <= x - y <= p_peak on their support and E[X - Y | h_j] <= budget.
// Projected gradient with simplex projections per row and an augmented
// Lagrangian for the two budget constraints; multi-start to be safe even
// though the problem is jointly convex.
inline MinKlResult min_kl_channel(const HypothesisModel& hyp, double p_peak,
                                  int restarts = 16, std::uint64_t seed = 1) {
  hyp.validate();
  if (p_peak < 0.0) throw ModelError("min kl: negative peak");
  const std::vector<double>& vals = hyp.load_h0.values;
  const int n = int(vals.size());
  const std::vector<double>& p0 = hyp.load_h0.probs;
  const std::vector<double>& p1 = hyp.load_h1.probs;

  std::vector<std::vector<char>> allow(n, std::vector<char>(n, 0));
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    bool any = false;
    for (int j = 0; j < n; ++j) {
      d[i][j] = vals[i] - vals[j];
      if (d[i][j] >= -1e-12 && d[i][j] <= p_peak + 1e-12) {
        allow[i][j] = 1;
        any = true;
      }
    }
    if (!any) throw ModelError("min kl: input symbol with empty feasible support");
  }

  auto expected_power = [&](const std::vector<std::vector<double>>& q,
                            const std::vector<double>& p) {
    double e = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) e += p[i] * q[i][j] * d[i][j];
    return e;
  };

  MinKlResult result;
  // No budget: only the identity is feasible for mass-carrying inputs.
  if (hyp.res_budget <= 1e-15) {
    result.channel_h0 = ChannelMatrix::identity(vals);
    result.channel_h1 = ChannelMatrix::identity(vals);
    result.divergence_bits = kl_divergence_bits(p0, p1);
    return result;
  }

  // If both hypotheses can reach a common constant output, the divergence
  // is exactly zero.
  for (int j = n - 1; j >= 0; --j) {
    bool common = true;
    for (int i = 0; i < n; ++i)
      if ((p0[i] > 0.0 || p1[i] > 0.0) && !allow[i][j]) common = false;
    if (!common) continue;
    double e0 = 0.0, e1 = 0.0;
    for (int i = 0; i < n; ++i) {
      e0 += p0[i] * d[i][j];
      e1 += p1[i] * d[i][j];
    }
    if (e0 <= hyp.res_budget + 1e-15 && e1 <= hyp.res_budget + 1e-15) {
      ChannelMatrix c;
      c.in_values = vals;
      c.out_values = vals;
      c.rows.assign(n, std::vector<double>(n, 0.0));
      for (int i = 0; i < n; ++i) c.rows[i][j] = 1.0;
      result.channel_h0 = c;
      result.channel_h1 = c;
      result.divergence_bits = 0.0;
      return result;
    }
  }

  auto divergence_nats = [&](const detail_hyp::PairState& s) {
    std::vector<double> m0(n, 0.0), m1(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        m0[j] += p0[i] * s.q0[i][j];
        m1[j] += p1[i] * s.q1[i][j];
      }
    double dv = 0.0;
    for (int j = 0; j < n; ++j) {
      if (m0[j] <= 0.0) continue;
      if (m1[j] <= 0.0) return std::numeric_limits<double>::infinity();
      dv += m0[j] * std::log(m0[j] / m1[j]);
    }
    return std::max(dv, 0.0);
  };

  Rng rng(seed);
  double best = std::numeric_limits<double>::infinity();
  detail_hyp::PairState best_state;

  for (int attempt = 0; attempt < restarts; ++attempt) {
    detail_hyp::PairState s;
    s.q0.assign(n, std::vector<double>(n, 0.0));
    s.q1.assign(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
      double sum0 = 0.0, sum1 = 0.0;
      for (int j = 0; j < n; ++j)
        if (allow[i][j]) {
          s.q0[i][j] = attempt == 0 ? (i == j ? 1.0 : 0.0) + 1e-3
                                    : rng.exponential(1.0) + 1e-6;
          s.q1[i][j] = attempt == 0 ? (i == j ? 1.0 : 0.0) + 1e-3
                                    : rng.exponential(1.0) + 1e-6;
          sum0 += s.q0[i][j];
          sum1 += s.q1[i][j];
        }
      for (int j = 0; j < n; ++j) {
        s.q0[i][j] /= sum0;
        s.q1[i][j] /= sum1;
      }
    }

    double lam0 = 0.0, lam1 = 0.0, mu = 8.0;
    for (int outer = 0; outer < 25; ++outer) {
      auto aug = [&](const detail_hyp::PairState& st) {
        double v = divergence_nats(st);
        const double c0 = hyp.res_budget - expected_power(st.q0, p0);
        const double c1 = hyp.res_budget - expected_power(st.q1, p1);
        for (auto [c, lam] : {std::pair{c0, lam0}, std::pair{c1, lam1}}) {
          if (c <= lam / mu)
            v += -lam * c + 0.5 * mu * c * c;
          else
            v += -0.5 * lam * lam / mu;
        }
        return v;
      };

      double cur = aug(s);
      double step = 0.05;
      detail_hyp::PairState trial = s;
      for (int it = 0; it < 4000; ++it) {
        // gradients
        std::vector<double> m0(n, 0.0), m1(n, 0.0);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            m0[j] += p0[i] * s.q0[i][j];
            m1[j] += p1[i] * s.q1[i][j];
          }
        const double c0 = hyp.res_budget - expected_power(s.q0, p0);
        const double c1 = hyp.res_budget - expected_power(s.q1, p1);
        const double m_0 = std::max(0.0, lam0 - mu * c0);
        const double m_1 = std::max(0.0, lam1 - mu * c1);

        std::vector<std::vector<double>> g0(n, std::vector<double>(n, 0.0)),
            g1(n, std::vector<double>(n, 0.0));
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            if (!allow[i][j]) continue;
            const double ratio =
                (m0[j] > 0.0 && m1[j] > 0.0) ? std::log(m0[j] / m1[j]) + 1.0 : 0.0;
            g0[i][j] = p0[i] * ratio + m_0 * p0[i] * d[i][j];
            const double frac = (m1[j] > 0.0) ? m0[j] / m1[j] : 0.0;
            g1[i][j] = -p1[i] * frac + m_1 * p1[i] * d[i][j];
          }

        bool accepted = false;
        for (int bt = 0; bt < 40 && !accepted; ++bt) {
          for (int i = 0; i < n; ++i) {
            std::vector<double> r0, r1;
            std::vector<int> js;
            for (int j = 0; j < n; ++j)
              if (allow[i][j]) {
                js.push_back(j);
                r0.push_back(s.q0[i][j] - step * g0[i][j]);
                r1.push_back(s.q1[i][j] - step * g1[i][j]);
              }
            detail_hyp::project_simplex(r0);
            detail_hyp::project_simplex(r1);
            for (int j = 0; j < n; ++j) {
              trial.q0[i][j] = 0.0;
              trial.q1[i][j] = 0.0;
            }
            for (std::size_t k = 0; k < js.size(); ++k) {
              trial.q0[i][js[k]] = r0[k];
              trial.q1[i][js[k]] = r1[k];
            }
          }
          const double tv = aug(trial);
          if (tv < cur - 1e-15) {
            accepted = true;
            s = trial;
            cur = tv;
            step *= 1.4;
          } else {
            step *= 0.5;
          }
        }
        if (!accepted || step < 1e-14) break;
      }

      const double c0 = hyp.res_budget - expected_power(s.q0, p0);
      const double c1 = hyp.res_budget - expected_power(s.q1, p1);
      lam0 = std::max(0.0, lam0 - mu * c0);
      lam1 = std::max(0.0, lam1 - mu * c1);
      if (c0 >= -1e-10 && c1 >= -1e-10 && outer > 2) break;
      mu = std::min(mu * 5.0, 1e9);
    }

    const double c0 = hyp.res_budget - expected_power(s.q0, p0);
    const double c1 = hyp.res_budget - expected_power(s.q1, p1);
    if (c0 < -1e-8 || c1 < -1e-8) continue;
    const double dv = divergence_nats(s);
    if (dv < best) {
      best = dv;
      best_state = s;
    }
  }

  if (!std::isfinite(best)) throw ModelError("min kl: no feasible channel pair found");
  result.channel_h0.in_values = vals;
  result.channel_h0.out_values = vals;
  result.channel_h0.rows = best_state.q0;
  result.channel_h1.in_values = vals;
  result.channel_h1.out_values = vals;
  result.channel_h1.rows = best_state.q1;
  result.divergence_bits = best / kLog2;
  return result;
}

}  // namespace smp::info
