#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "smp/errors.hpp"

namespace smp::info {

constexpr double kLog2 = 0.6931471805599453;

// All public quantities are in bits.

inline double entropy_bits(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) {
    if (v < -1e-12) throw ModelError("entropy: negative probability");
    if (v > 0.0) h -= v * std::log2(v);
  }
  return h;
}

struct Pmf {
  std::vector<double> values;  // support points (kW levels)
  std::vector<double> probs;

  void validate() const {
    if (values.empty() || values.size() != probs.size())
      throw ModelError("pmf: empty or mismatched support");
    double s = 0.0;
    for (double p : probs) {
      if (p < 0.0) throw ModelError("pmf: negative probability");
      s += p;
    }
    if (std::fabs(s - 1.0) > 1e-9) throw ModelError("pmf: probabilities do not sum to 1");
  }

  double mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) m += values[i] * probs[i];
    return m;
  }

  double max_value() const { return *std::max_element(values.begin(), values.end()); }

  double entropy() const { return entropy_bits(probs); }
};

// Row-stochastic conditional distribution p(out | in).
struct ChannelMatrix {
  std::vector<double> in_values;
  std::vector<double> out_values;
  std::vector<std::vector<double>> rows;

  static ChannelMatrix identity(const std::vector<double>& values) {
    ChannelMatrix c;
    c.in_values = values;
    c.out_values = values;
    c.rows.assign(values.size(), std::vector<double>(values.size(), 0.0));
    for (std::size_t i = 0; i < values.size(); ++i) c.rows[i][i] = 1.0;
    return c;
  }

  void validate() const {
    if (in_values.empty() || out_values.empty())
      throw ModelError("channel: empty alphabet");
    if (rows.size() != in_values.size())
      throw ModelError("channel: row count does not match input alphabet");
    for (const auto& row : rows) {
      if (row.size() != out_values.size())
        throw ModelError("channel: row width does not match output alphabet");
      double s = 0.0;
      for (double p : row) {
        if (p < 0.0) throw ModelError("channel: negative entry");
        s += p;
      }
      if (std::fabs(s - 1.0) > 1e-9) throw ModelError("channel: row does not sum to 1");
    }
  }

  std::vector<double> output_marginal(const Pmf& input) const {
    std::vector<double> m(out_values.size(), 0.0);
    for (std::size_t i = 0; i < in_values.size(); ++i)
      for (std::size_t j = 0; j < out_values.size(); ++j)
        m[j] += input.probs[i] * rows[i][j];
    return m;
  }
};

// I(X;Y) = H(X) + H(Y) - H(X,Y) of a joint matrix (rows = x, cols = y).
inline double mutual_information_bits(const std::vector<std::vector<double>>& joint) {
  if (joint.empty() || joint.front().empty()) throw ModelError("mi: empty joint");
  const std::size_t ny = joint.front().size();
  std::vector<double> px(joint.size(), 0.0), py(ny, 0.0);
  double total = 0.0, hxy = 0.0;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    if (joint[i].size() != ny) throw ModelError("mi: ragged joint");
    for (std::size_t j = 0; j < ny; ++j) {
      const double p = joint[i][j];
      if (p < -1e-12) throw ModelError("mi: negative joint entry");
      if (p > 0.0) {
        px[i] += p;
        py[j] += p;
        total += p;
        hxy -= p * std::log2(p);
      }
    }
  }
  if (std::fabs(total - 1.0) > 1e-9) throw ModelError("mi: joint does not sum to 1");
  const double mi = entropy_bits(px) + entropy_bits(py) - hxy;
  return std::max(mi, 0.0);
}

// I(X;Y) for a given input pmf and channel, in bits.
inline double channel_mutual_information_bits(const Pmf& input, const ChannelMatrix& ch) {
  const std::vector<double> m = ch.output_marginal(input);
  double mi = 0.0;
  for (std::size_t i = 0; i < ch.in_values.size(); ++i) {
    if (input.probs[i] == 0.0) continue;
    for (std::size_t j = 0; j < ch.out_values.size(); ++j) {
      const double p = ch.rows[i][j];
      if (p > 0.0) mi += input.probs[i] * p * std::log2(p / m[j]);
    }
  }
  return std::max(mi, 0.0);
}

inline double kl_divergence_bits(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw ModelError("kl: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw ModelError("kl: negative probability");
    if (p[i] > 0.0) {
      if (q[i] <= 0.0)
        throw ModelError("kl: absolute continuity violated at index " + std::to_string(i));
      d += p[i] * std::log2(p[i] / q[i]);
    }
  }
  return std::max(d, 0.0);
}

inline double kl_divergence_bits(const Pmf& p, const Pmf& q) {
  p.validate();
  q.validate();
  if (p.values != q.values) throw ModelError("kl: supports differ");
  return kl_divergence_bits(p.probs, q.probs);
}

// ---- empirical estimators over symbol sequences -------------------------

// Map a real-valued series onto a compact symbol alphabet (exact value
// match up to `tol`).
struct SymbolSeq {
  std::vector<int> idx;
  std::vector<double> levels;
  int alphabet() const { return int(levels.size()); }
};

inline SymbolSeq quantize_series(const std::vector<double>& v, double tol = 1e-9) {
  SymbolSeq s;
  std::map<long long, int> lookup;
  for (double x : v) {
    const long long key = std::llround(x / tol);
    auto it = lookup.find(key);
    if (it == lookup.end()) {
      it = lookup.emplace(key, int(s.levels.size())).first;
      s.levels.push_back(x);
    }
    s.idx.push_back(it->second);
  }
  return s;
}

inline std::vector<std::vector<double>> empirical_joint(const std::vector<int>& x,
                                                        const std::vector<int>& y,
                                                        int nx, int ny) {
  if (x.size() != y.size() || x.empty())
    throw ModelError("empirical joint: empty or mismatched sequences");
  std::vector<std::vector<double>> joint(nx, std::vector<double>(ny, 0.0));
  const double w = 1.0 / double(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) joint[x[t]][y[t]] += w;
  return joint;
}

// Plug-in mutual information of the empirical joint; optionally
// normalized by the empirical input entropy. No bias correction.
inline double empirical_mi_plugin_bits(const std::vector<int>& x, const std::vector<int>& y,
                                       bool normalize = false) {
  const int nx = x.empty() ? 0 : *std::max_element(x.begin(), x.end()) + 1;
  const int ny = y.empty() ? 0 : *std::max_element(y.begin(), y.end()) + 1;
  const auto joint = empirical_joint(x, y, nx, ny);
  const double mi = mutual_information_bits(joint);
  if (!normalize) return mi;
  std::vector<double> px(nx, 0.0);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) px[i] += joint[i][j];
  const double hx = entropy_bits(px);
  if (hx <= 1e-15) return 0.0;
  return mi / hx;
}

inline double empirical_mi_plugin_bits(const std::vector<double>& x,
                                       const std::vector<double>& y,
                                       bool normalize = false) {
  return empirical_mi_plugin_bits(quantize_series(x).idx, quantize_series(y).idx, normalize);
}

// Empirical conditional entropy rate H(X | Y, C) from joint frequencies.
inline double conditional_entropy_rate_bits(const std::vector<int>& x,
                                            const std::vector<int>& y,
                                            const std::vector<int>& c) {
  if (x.size() != y.size() || x.size() != c.size() || x.empty())
    throw ModelError("conditional entropy: mismatched sequences");
  std::map<std::pair<long long, long long>, double> pxyc;
  std::map<long long, double> pyc;
  const double w = 1.0 / double(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    const long long yc = (long long)(y[t]) * 1000003LL + c[t];
    pxyc[{yc, x[t]}] += w;
    pyc[yc] += w;
  }
  double h = 0.0;
  for (const auto& [key, p] : pxyc) h -= p * std::log2(p);
  for (const auto& [key, p] : pyc) h += p * std::log2(p);
  return std::max(h, 0.0);
}

inline double conditional_entropy_rate_bits(const std::vector<double>& x,
                                            const std::vector<double>& y,
                                            const std::vector<double>& c) {
  return conditional_entropy_rate_bits(quantize_series(x).idx, quantize_series(y).idx,
                                       quantize_series(c).idx);
}

// KL divergence between binned empirical marginals. Add-one smoothing is
// applied to the reference histogram only when it has an empty bin that
// the first histogram populates, so identical series give exactly 0.
inline double empirical_relative_entropy_bits(const std::vector<double>& x,
                                              const std::vector<double>& y, int bins) {
  if (bins < 2) throw ModelError("relative entropy: need at least 2 bins");
  if (x.empty() || y.empty()) throw ModelError("relative entropy: empty series");
  double lo = x.front(), hi = x.front();
  for (double v : x) { lo = std::min(lo, v); hi = std::max(hi, v); }
  for (double v : y) { lo = std::min(lo, v); hi = std::max(hi, v); }
  if (hi <= lo) return 0.0;  // both series constant at the same value
  const double width = (hi - lo) / bins;
  auto bin_of = [&](double v) {
    int b = int((v - lo) / width);
    return std::clamp(b, 0, bins - 1);
  };
  std::vector<double> cx(bins, 0.0), cy(bins, 0.0);
  for (double v : x) cx[bin_of(v)] += 1.0;
  for (double v : y) cy[bin_of(v)] += 1.0;

  bool needs_smoothing = false;
  for (int b = 0; b < bins; ++b)
    if (cx[b] > 0.0 && cy[b] == 0.0) needs_smoothing = true;
  if (needs_smoothing)
    for (int b = 0; b < bins; ++b) cy[b] += 1.0;

  const double nx = double(x.size());
  double ny = 0.0;
  for (double v : cy) ny += v;
  double d = 0.0;
  for (int b = 0; b < bins; ++b)
    if (cx[b] > 0.0) d += (cx[b] / nx) * std::log2((cx[b] / nx) / (cy[b] / ny));
  return std::max(d, 0.0);
}

struct Alignment {
  int lag = 0;
  double correlation = 0.0;
  bool defined = true;
};

// Best-lag normalized cross-correlation; lag L means y_t tracks x_{t-L}.
inline Alignment max_crosscorr_alignment(const std::vector<double>& x,
                                         const std::vector<double>& y, int max_lag) {
  if (x.size() != y.size() || x.empty())
    throw ModelError("crosscorr: empty or mismatched series");
  const int n = int(x.size());
  Alignment best;
  best.defined = false;
  best.correlation = -2.0;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double sx = 0.0, sy = 0.0;
    int count = 0;
    for (int t = 0; t < n; ++t) {
      const int s = t - lag;
      if (s < 0 || s >= n) continue;
      sx += x[s];
      sy += y[t];
      ++count;
    }
    if (count < 2) continue;
    const double mx = sx / count, my = sy / count;
    double vxx = 0.0, vyy = 0.0, vxy = 0.0;
    for (int t = 0; t < n; ++t) {
      const int s = t - lag;
      if (s < 0 || s >= n) continue;
      vxx += (x[s] - mx) * (x[s] - mx);
      vyy += (y[t] - my) * (y[t] - my);
      vxy += (x[s] - mx) * (y[t] - my);
    }
    if (vxx <= 1e-15 || vyy <= 1e-15) continue;
    const double r = vxy / std::sqrt(vxx * vyy);
    if (!best.defined || r > best.correlation ||
        (r == best.correlation && std::abs(lag) < std::abs(best.lag))) {
      best.defined = true;
      best.lag = lag;
      best.correlation = r;
    }
  }
  return best;
}

}  // namespace smp::info
