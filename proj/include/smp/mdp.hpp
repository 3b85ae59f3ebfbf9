#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "smp/battery.hpp"
#include "smp/errors.hpp"
#include "smp/rng.hpp"

namespace smp::policies {

// Generic finite MDP. Invalid state/action pairs are masked out rather
// than given a punitive reward.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<std::vector<std::vector<std::pair<int, double>>>> trans;  // [s][a] -> (s',p)
  std::vector<std::vector<double>> reward;                              // [s][a]
  std::vector<std::vector<char>> valid;                                 // [s][a]

  void validate() const {
    if (n_states < 1 || n_actions < 1) throw ModelError("mdp: empty spaces");
    if (int(trans.size()) != n_states || int(reward.size()) != n_states ||
        int(valid.size()) != n_states)
      throw ModelError("mdp: table size mismatch");
    for (int s = 0; s < n_states; ++s) {
      bool any = false;
      for (int a = 0; a < n_actions; ++a) {
        if (!valid[s][a]) continue;
        any = true;
        double sum = 0.0;
        for (const auto& [sp, p] : trans[s][a]) {
          if (sp < 0 || sp >= n_states) throw ModelError("mdp: bad successor state");
          if (p < 0.0) throw ModelError("mdp: negative transition probability");
          sum += p;
        }
        if (std::fabs(sum - 1.0) > 1e-9)
          throw ModelError("mdp: transition row does not sum to 1");
        if (!std::isfinite(reward[s][a])) throw ModelError("mdp: non-finite reward");
      }
      if (!any) throw ModelError("mdp: state without a feasible action");
    }
  }
};

// Discretized shaping problem: states are (battery level, load level),
// actions are grid-load levels, the load evolves by a given first-order
// law and the battery follows the slot update exactly on the level grid.
// Reward trades cost against distance to the target:
//   r = -[(1-alpha) * y * price + alpha * (y - w)^2]
struct MdpSpec {
  std::vector<double> battery_levels_kwh;
  std::vector<double> load_levels_kw;
  std::vector<double> action_levels_kw;
  std::vector<std::vector<double>> load_transition;  // p(x' | x)
  double alpha = 0.5;
  double price = 1.0;
  double target_w = 0.0;
  double p_charge_kw = 1e30;
  double p_discharge_kw = 1e30;
  double tau_h = 1.0;
  double discount = 0.95;
};

inline TabularMdp build_shaping_mdp(const MdpSpec& spec) {
  const int nb = int(spec.battery_levels_kwh.size());
  const int nx = int(spec.load_levels_kw.size());
  const int ny = int(spec.action_levels_kw.size());
  if (nb < 1 || nx < 1 || ny < 1) throw ModelError("mdp spec: empty level sets");
  if (int(spec.load_transition.size()) != nx)
    throw ModelError("mdp spec: load transition size mismatch");
  if (spec.discount < 0.0 || spec.discount >= 1.0)
    throw ModelError("mdp spec: discount outside [0,1)");

  const double b_max = spec.battery_levels_kwh.back();
  auto level_index = [&](double b) {
    int best = 0;
    double dist = std::fabs(spec.battery_levels_kwh[0] - b);
    for (int i = 1; i < nb; ++i) {
      const double d = std::fabs(spec.battery_levels_kwh[i] - b);
      if (d < dist) {
        dist = d;
        best = i;
      }
    }
    if (dist > 1e-9)
      throw ModelError("mdp spec: battery grid is not closed under the dynamics");
    return best;
  };

  TabularMdp mdp;
  mdp.n_states = nb * nx;
  mdp.n_actions = ny;
  mdp.trans.assign(mdp.n_states, {});
  mdp.reward.assign(mdp.n_states, std::vector<double>(ny, 0.0));
  mdp.valid.assign(mdp.n_states, std::vector<char>(ny, 0));

  BatterySpec battery;
  battery.b_max_kwh = b_max;
  battery.p_charge_kw = spec.p_charge_kw;
  battery.p_discharge_kw = spec.p_discharge_kw;

  for (int bi = 0; bi < nb; ++bi)
    for (int xi = 0; xi < nx; ++xi) {
      const int s = bi * nx + xi;
      mdp.trans[s].assign(ny, {});
      const double b = spec.battery_levels_kwh[bi];
      const double x = spec.load_levels_kw[xi];
      for (int ai = 0; ai < ny; ++ai) {
        const double y = spec.action_levels_kw[ai];
        SystemState st{0, b};
        if (check_feasible(x, y, 0.0, st, battery, spec.tau_h)) continue;
        const double next_b = std::min(
            b + detail::stored_delta_kwh(x, y, 0.0, battery, spec.tau_h), b_max);
        const int nbi = level_index(next_b);
        mdp.valid[s][ai] = 1;
        const double dev = y - spec.target_w;
        mdp.reward[s][ai] =
            -((1.0 - spec.alpha) * y * spec.price + spec.alpha * dev * dev);
        for (int xj = 0; xj < nx; ++xj) {
          const double p = spec.load_transition[xi][xj];
          if (p > 0.0) mdp.trans[s][ai].push_back({nbi * nx + xj, p});
        }
      }
    }
  mdp.validate();
  return mdp;
}

struct ViResult {
  std::vector<int> policy;
  std::vector<double> value;
  int iterations = 0;
  double residual = 0.0;
};

inline ViResult value_iteration(const TabularMdp& mdp, double discount, double tol,
                                int max_iters = 1000000) {
  mdp.validate();
  if (discount < 0.0 || discount >= 1.0) throw ModelError("vi: discount outside [0,1)");
  ViResult res;
  res.value.assign(mdp.n_states, 0.0);
  std::vector<double> next(mdp.n_states, 0.0);
  for (int it = 0; it < max_iters; ++it) {
    double residual = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp.n_actions; ++a) {
        if (!mdp.valid[s][a]) continue;
        double q = mdp.reward[s][a];
        for (const auto& [sp, p] : mdp.trans[s][a]) q += discount * p * res.value[sp];
        best = std::max(best, q);
      }
      next[s] = best;
      residual = std::max(residual, std::fabs(next[s] - res.value[s]));
    }
    res.value.swap(next);
    res.iterations = it + 1;
    res.residual = residual;
    if (residual < tol) break;
  }
  res.policy.assign(mdp.n_states, -1);
  for (int s = 0; s < mdp.n_states; ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (!mdp.valid[s][a]) continue;
      double q = mdp.reward[s][a];
      for (const auto& [sp, p] : mdp.trans[s][a]) q += discount * p * res.value[sp];
      if (q > best + 1e-12) {
        best = q;
        res.policy[s] = a;
      }
    }
  }
  return res;
}

struct QlSchedules {
  double learn_rate0 = 0.5;
  double learn_decay_pow = 0.8;  // per-(s,a) visit-count decay exponent
  double explore0 = 1.0;         // linearly annealed to 0 over the step budget
  int episode_length = 100;
};

struct QlResult {
  std::vector<int> policy;
  std::vector<std::vector<double>> q;
  int steps = 0;
};

// Tabular Q-learning with epsilon-greedy exploration annealed to zero and
// a per-pair square-summable learning-rate schedule; episodes restart from
// uniformly random states so every pair keeps being visited.
inline QlResult q_learning(const TabularMdp& mdp, double discount, const QlSchedules& sched,
                           int steps, std::uint64_t seed) {
  mdp.validate();
  if (discount < 0.0 || discount >= 1.0) throw ModelError("ql: discount outside [0,1)");
  Rng rng(seed);
  QlResult res;
  res.q.assign(mdp.n_states, std::vector<double>(mdp.n_actions, 0.0));
  std::vector<std::vector<int>> visits(mdp.n_states, std::vector<int>(mdp.n_actions, 0));

  auto greedy = [&](int s) {
    int best = -1;
    double bq = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp.n_actions; ++a) {
      if (!mdp.valid[s][a]) continue;
      if (res.q[s][a] > bq + 1e-12) {
        bq = res.q[s][a];
        best = a;
      }
    }
    return best;
  };
  auto random_valid = [&](int s) {
    int count = 0;
    for (int a = 0; a < mdp.n_actions; ++a) count += mdp.valid[s][a];
    int pick = rng.next_int(count);
    for (int a = 0; a < mdp.n_actions; ++a)
      if (mdp.valid[s][a] && pick-- == 0) return a;
    return -1;
  };

  int s = rng.next_int(mdp.n_states);
  for (int t = 0; t < steps; ++t) {
    if (t % sched.episode_length == 0) s = rng.next_int(mdp.n_states);
    const double eps = sched.explore0 * (1.0 - double(t) / double(steps));
    const int a = rng.next_double() < eps ? random_valid(s) : greedy(s);
    // sample the successor
    const double u = rng.next_double();
    double acc = 0.0;
    int sp = mdp.trans[s][a].back().first;
    for (const auto& [cand, p] : mdp.trans[s][a]) {
      acc += p;
      if (u < acc) {
        sp = cand;
        break;
      }
    }
    double best_next = -std::numeric_limits<double>::infinity();
    for (int b = 0; b < mdp.n_actions; ++b)
      if (mdp.valid[sp][b]) best_next = std::max(best_next, res.q[sp][b]);
    const double lr =
        sched.learn_rate0 / std::pow(1.0 + double(visits[s][a]), sched.learn_decay_pow);
    ++visits[s][a];
    res.q[s][a] += lr * (mdp.reward[s][a] + discount * best_next - res.q[s][a]);
    s = sp;
  }
  res.steps = steps;
  res.policy.assign(mdp.n_states, -1);
  for (int st = 0; st < mdp.n_states; ++st) res.policy[st] = greedy(st);
  return res;
}

// Exact policy evaluation by iterating the fixed point; returns the
// normalized discounted value (1-gamma) * mean_s V(s), a handy scalar for
// comparing two policies.
inline double policy_average_reward(const TabularMdp& mdp, const std::vector<int>& policy,
                                    double discount, double tol = 1e-12) {
  mdp.validate();
  std::vector<double> v(mdp.n_states, 0.0), next(mdp.n_states, 0.0);
  for (int it = 0; it < 2000000; ++it) {
    double residual = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
      const int a = policy[s];
      if (a < 0 || !mdp.valid[s][a]) throw ModelError("policy evaluation: invalid action");
      double q = mdp.reward[s][a];
      for (const auto& [sp, p] : mdp.trans[s][a]) q += discount * p * v[sp];
      next[s] = q;
      residual = std::max(residual, std::fabs(next[s] - v[s]));
    }
    v.swap(next);
    if (residual < tol) break;
  }
  double mean = 0.0;
  for (double x : v) mean += x;
  return (1.0 - discount) * mean / double(mdp.n_states);
}

}  // namespace smp::policies
