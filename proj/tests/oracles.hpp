// Test-only reference solvers, independent of the library's optimization
// paths. Deliberately brute-force.
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracles {

// Dense Gaussian elimination with partial pivoting; returns false when
// singular.
inline bool solve_dense(std::vector<std::vector<double>> a, std::vector<double> b,
                        std::vector<double>& x) {
  const int n = int(a.size());
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    if (std::fabs(a[pivot][col]) < 1e-12) return false;
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (int i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return true;
}

// Exact minimizer of
//   sum_t lin[t] y[t] + quad (y[t]-target[t])^2
// over lb <= y <= ub and the cumulative battery constraints
//   b1/tau + sum_{s<=t} (e-x+y)_s >= 0
// (unit efficiencies, capacity assumed never binding) by enumerating KKT
// active sets. Requires quad > 0. Only sensible for tiny horizons.
struct ActiveSetQp {
  std::vector<double> x, e, lin, target, lb, ub;
  double tau = 1.0;
  double quad = 0.5;
  double b_initial = 0.0;
};

inline double active_set_solve(const ActiveSetQp& qp, std::vector<double>& best_y) {
  const int n = int(qp.x.size());
  // constraint list: a.y >= rhs
  struct Cons {
    std::vector<double> a;
    double rhs;
  };
  std::vector<Cons> cons;
  for (int t = 0; t < n; ++t) {
    Cons c1{std::vector<double>(n, 0.0), qp.lb[t]};
    c1.a[t] = 1.0;
    cons.push_back(c1);
    Cons c2{std::vector<double>(n, 0.0), -qp.ub[t]};
    c2.a[t] = -1.0;
    cons.push_back(c2);
    Cons c3{std::vector<double>(n, 0.0), 0.0};
    double r = -qp.b_initial / qp.tau;
    for (int s = 0; s <= t; ++s) {
      c3.a[s] = 1.0;
      r += qp.x[s] - qp.e[s];
    }
    c3.rhs = r;
    cons.push_back(c3);
  }
  const int m = int(cons.size());

  double best = std::numeric_limits<double>::infinity();
  best_y.clear();

  std::vector<int> subset;
  std::vector<double> sol;
  auto try_subset = [&]() {
    const int k = int(subset.size());
    std::vector<std::vector<double>> a(n + k, std::vector<double>(n + k, 0.0));
    std::vector<double> rhs(n + k, 0.0);
    for (int i = 0; i < n; ++i) {
      a[i][i] = 2.0 * qp.quad;
      rhs[i] = 2.0 * qp.quad * qp.target[i] - qp.lin[i];
      for (int j = 0; j < k; ++j) a[i][n + j] = -cons[subset[j]].a[i];
    }
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < n; ++i) a[n + j][i] = cons[subset[j]].a[i];
      rhs[n + j] = cons[subset[j]].rhs;
    }
    if (!solve_dense(a, rhs, sol)) return;
    for (int j = 0; j < k; ++j)
      if (sol[n + j] < -1e-9) return;  // wrong multiplier sign
    for (const auto& c : cons) {
      double v = -c.rhs;
      for (int i = 0; i < n; ++i) v += c.a[i] * sol[i];
      if (v < -1e-9) return;  // primal infeasible
    }
    double obj = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = sol[i] - qp.target[i];
      obj += qp.lin[i] * sol[i] + qp.quad * d * d;
    }
    if (obj < best) {
      best = obj;
      best_y.assign(sol.begin(), sol.begin() + n);
    }
  };

  // subsets of active constraints up to size n
  std::vector<int> stack;
  std::function<void(int)> rec = [&](int start) {
    try_subset();
    if (int(subset.size()) == n) return;
    for (int i = start; i < m; ++i) {
      subset.push_back(i);
      rec(i + 1);
      subset.pop_back();
    }
  };
  (void)stack;
  rec(0);
  return best;
}

}  // namespace oracles
