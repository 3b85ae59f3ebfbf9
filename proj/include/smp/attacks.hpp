#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "smp/errors.hpp"
#include "smp/hypothesis.hpp"
#include "smp/info.hpp"
#include "smp/rng.hpp"

namespace smp::attacks {

// ---- edge events ------------------------------------------------------------

struct Event {
  int slot = 0;          // slot where the change lands
  double magnitude = 0;  // signed y_t - y_{t-1}
};

// Appliance on/off probing: flag every slot-to-slot change at least as
// large as the threshold.
inline std::vector<Event> edge_detector(const std::vector<double>& y, double threshold) {
  if (threshold <= 0.0) throw ModelError("edge detector: threshold must be positive");
  std::vector<Event> events;
  for (std::size_t t = 1; t < y.size(); ++t) {
    const double d = y[t] - y[t - 1];
    if (std::fabs(d) >= threshold) events.push_back({int(t), d});
  }
  return events;
}

// ---- peak recovery on quantized profiles ------------------------------------

struct PeakRuns {
  std::vector<std::pair<int, int>> runs;  // [start, end] inclusive, at the top level
  std::vector<int> candidates;            // run starts, proposed demand-peak slots
};

// Against a stepping-quantized profile, maximal runs at the top
// quantization level betray demand peaks. A run covering the whole trace
// carries no evidence and is ignored.
inline PeakRuns peak_recovery(const std::vector<double>& y, double beta) {
  if (beta <= 0.0) throw ModelError("peak recovery: beta must be positive");
  if (y.empty()) throw ModelError("peak recovery: empty series");
  std::vector<long> h(y.size());
  for (std::size_t t = 0; t < y.size(); ++t) {
    const double q = y[t] / beta;
    h[t] = std::lround(q);
    if (std::fabs(q - double(h[t])) > 1e-6)
      throw ModelError("peak recovery: series is not on the quantization grid");
  }
  const long top = *std::max_element(h.begin(), h.end());
  PeakRuns out;
  const int n = int(y.size());
  int t = 0;
  while (t < n) {
    if (h[t] != top) {
      ++t;
      continue;
    }
    int end = t;
    while (end + 1 < n && h[end + 1] == top) ++end;
    if (!(t == 0 && end == n - 1)) {
      out.runs.emplace_back(t, end);
      out.candidates.push_back(t);
    }
    t = end + 1;
  }
  return out;
}

struct MatchScore {
  double recall = 0.0;
  double precision = 0.0;
  int hits = 0;
};

// Match candidates against ground-truth peak slots within +/- tol slots.
inline MatchScore score_candidates(const std::vector<int>& candidates,
                                   const std::vector<int>& truth, int tol = 1) {
  MatchScore s;
  if (truth.empty()) {
    s.recall = 1.0;
    s.precision = candidates.empty() ? 1.0 : 0.0;
    return s;
  }
  int found = 0;
  for (int g : truth) {
    for (int c : candidates)
      if (std::abs(c - g) <= tol) {
        ++found;
        break;
      }
  }
  int good = 0;
  for (int c : candidates)
    for (int g : truth)
      if (std::abs(c - g) <= tol) {
        ++good;
        break;
      }
  s.hits = found;
  s.recall = double(found) / double(truth.size());
  s.precision = candidates.empty() ? 0.0 : double(good) / double(candidates.size());
  return s;
}

// ---- likelihood-ratio testing ------------------------------------------------

namespace detail_atk {

inline std::vector<double> log2_ratio_per_symbol(const info::Pmf& px0, const info::Pmf& px1,
                                                 const info::ChannelMatrix& q0,
                                                 const info::ChannelMatrix& q1) {
  const std::vector<double> m0 = q0.output_marginal(px0);
  const std::vector<double> m1 = q1.output_marginal(px1);
  std::vector<double> llr(m0.size());
  for (std::size_t j = 0; j < m0.size(); ++j) {
    if (m0[j] <= 0.0 && m1[j] <= 0.0)
      llr[j] = std::numeric_limits<double>::quiet_NaN();  // unseeable symbol
    else if (m0[j] <= 0.0)
      llr[j] = -std::numeric_limits<double>::infinity();
    else if (m1[j] <= 0.0)
      llr[j] = std::numeric_limits<double>::infinity();
    else
      llr[j] = std::log2(m0[j] / m1[j]);
  }
  return llr;
}

inline int output_index(const info::ChannelMatrix& q, double value) {
  for (std::size_t j = 0; j < q.out_values.size(); ++j)
    if (std::fabs(q.out_values[j] - value) < 1e-9) return int(j);
  throw ModelError("lrt: observation outside the output alphabet");
}

}  // namespace detail_atk

// Decide the hypothesis behind an observed grid-load sequence by
// thresholding the log-likelihood ratio (bits); the attacker knows the
// policy exactly.
inline info::Pmf induced_output(const info::Pmf& px, const info::ChannelMatrix& q) {
  info::Pmf out;
  out.values = q.out_values;
  out.probs = q.output_marginal(px);
  return out;
}

inline bool lrt_decides_h0(const std::vector<double>& y, const info::HypothesisModel& hyp,
                           const info::ChannelMatrix& q0, const info::ChannelMatrix& q1,
                           double threshold_bits) {
  const auto llr = detail_atk::log2_ratio_per_symbol(hyp.load_h0, hyp.load_h1, q0, q1);
  double total = 0.0;
  for (double v : y) {
    const int j = detail_atk::output_index(q0, v);
    if (std::isnan(llr[j]))
      throw ModelError("lrt: zero-likelihood observation under both hypotheses");
    total += llr[j];
    if (std::isinf(total)) break;
  }
  return total >= threshold_bits;
}

struct ExponentReport {
  double type1 = 0.0;          // achieved false-alarm rate at the calibrated threshold
  double type2 = 0.0;          // miss probability
  double exponent_bits = 0.0;  // -log2(p_II)/n
  double ci_low_bits = 0.0;
  double ci_high_bits = 0.0;
  double threshold_bits = 0.0;
};

// Fix the type-I error at `p1_cap` with a randomized threshold calibrated
// on h0 samples, then estimate the miss probability. At realistic n the
// miss probability is far below what counting can see, so it is estimated
// by importance sampling under h0 (weight 2^-LLR per sequence, exact
// change of measure for the induced i.i.d. outputs), in the log domain.
inline ExponentReport estimate_error_exponents(const info::HypothesisModel& hyp,
                                               const info::ChannelMatrix& q0,
                                               const info::ChannelMatrix& q1, int n,
                                               int trials, double p1_cap,
                                               std::uint64_t seed) {
  hyp.validate();
  q0.validate();
  q1.validate();
  if (n < 1 || trials < 10) throw ModelError("exponent: need n >= 1 and trials >= 10");
  if (p1_cap <= 0.0 || p1_cap >= 1.0) throw ModelError("exponent: p1 cap outside (0,1)");

  const auto llr = detail_atk::log2_ratio_per_symbol(hyp.load_h0, hyp.load_h1, q0, q1);
  const std::vector<double> m0 = q0.output_marginal(hyp.load_h0);
  for (std::size_t j = 0; j < m0.size(); ++j)
    if (m0[j] > 0.0 && std::isnan(llr[j]))
      throw ModelError("exponent: inconsistent output alphabets");

  auto sample_llr = [&](Rng& rng) {
    double total = 0.0;
    for (int t = 0; t < n; ++t) {
      const double u = rng.next_double();
      double acc = 0.0;
      int pick = int(m0.size()) - 1;
      for (std::size_t j = 0; j < m0.size(); ++j) {
        acc += m0[j];
        if (u < acc) {
          pick = int(j);
          break;
        }
      }
      total += llr[pick];
    }
    return total;
  };

  // Calibration set: randomized Neyman-Pearson threshold at the cap.
  Rng rng(seed);
  std::vector<double> cal(trials);
  for (auto& v : cal) v = sample_llr(rng);
  std::vector<double> sorted = cal;
  std::sort(sorted.begin(), sorted.end());
  const int k = int(std::floor(p1_cap * trials));
  const double thr = sorted[std::max(0, std::min(trials - 1, k))];
  // P(LLR < thr), P(LLR == thr) on the calibration set
  double below = 0.0, at = 0.0;
  for (double v : cal) {
    if (v < thr) below += 1.0;
    if (v == thr) at += 1.0;
  }
  below /= trials;
  at /= trials;
  const double randomize = at > 0.0 ? std::clamp((p1_cap - below) / at, 0.0, 1.0) : 0.0;

  // Fresh h0 sample for the importance-sampling estimate of p_II:
  // p_II = E_h0[ (1{LLR > thr} + (1-r) 1{LLR == thr}) * 2^-LLR ].
  std::vector<double> logw;  // log2 of qualifying weights
  logw.reserve(trials);
  double p1_hat = 0.0;
  for (int i = 0; i < trials; ++i) {
    const double v = sample_llr(rng);
    double qualify = 0.0;
    if (v > thr)
      qualify = 1.0;
    else if (v == thr)
      qualify = 1.0 - randomize;
    if (v < thr)
      p1_hat += 1.0;
    else if (v == thr)
      p1_hat += randomize;
    if (qualify > 0.0 && std::isfinite(v))
      logw.push_back(-v + std::log2(qualify));
  }
  p1_hat /= trials;

  ExponentReport rep;
  rep.threshold_bits = thr;
  rep.type1 = p1_hat;
  if (logw.empty()) {
    rep.type2 = 0.0;
    rep.exponent_bits = std::numeric_limits<double>::infinity();
    return rep;
  }
  const double lmax = *std::max_element(logw.begin(), logw.end());
  double sum = 0.0, sumsq = 0.0;
  for (double lw : logw) {
    const double w = std::exp2(lw - lmax);
    sum += w;
    sumsq += w * w;
  }
  const double log2_p2 = lmax + std::log2(sum) - std::log2(double(trials));
  rep.type2 = std::exp2(log2_p2);
  rep.exponent_bits = -log2_p2 / double(n);

  // Delta-method CI on log2 p_II from the weight spread.
  const double mean = sum / trials;
  const double var = std::max(0.0, sumsq / trials - mean * mean);
  const double se_rel = mean > 0.0 ? std::sqrt(var / trials) / mean : 0.0;
  const double half = 1.96 * se_rel / info::kLog2;  // in bits
  rep.ci_low_bits = (-log2_p2 - half) / double(n);
  rep.ci_high_bits = (-log2_p2 + half) / double(n);
  return rep;
}

}  // namespace smp::attacks
