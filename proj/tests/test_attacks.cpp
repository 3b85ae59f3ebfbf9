#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "smp/attacks.hpp"
#include "smp/heuristics.hpp"
#include "smp/hypothesis.hpp"
#include "smp/rng.hpp"

using namespace smp;
using namespace smp::attacks;

namespace {

info::Pmf bernoulli(double p1) { return info::Pmf{{0.0, 1.0}, {1.0 - p1, p1}}; }

}  // namespace

TEST_CASE("edge detector: flat trace has no events") {
  std::vector<double> y(20, 1.5);
  CHECK(edge_detector(y, 0.5).empty());
}

TEST_CASE("edge detector: a single step is one signed event") {
  std::vector<double> y{1.0, 1.0, 3.0, 3.0};
  auto events = edge_detector(y, 1.0);
  REQUIRE(events.size() == 1);
  CHECK(events[0].slot == 2);
  CHECK(events[0].magnitude == doctest::Approx(2.0));
}

TEST_CASE("edge detector: threshold monotonicity and shift equivariance") {
  Rng rng(12);
  std::vector<double> y(64);
  for (auto& v : y) v = rng.uniform(0.0, 4.0);
  auto lo = edge_detector(y, 0.5);
  auto hi = edge_detector(y, 1.5);
  CHECK(hi.size() <= lo.size());
  for (const auto& e : hi) {
    bool found = false;
    for (const auto& f : lo) found = found || (f.slot == e.slot && f.magnitude == e.magnitude);
    CHECK(found);
  }
  // shift the series in time: events shift with it
  std::vector<double> shifted(y.size() + 3, y[0]);
  for (std::size_t t = 0; t < y.size(); ++t) shifted[t + 3] = y[t];
  auto se = edge_detector(shifted, 0.5);
  REQUIRE(se.size() == lo.size());
  for (std::size_t i = 0; i < lo.size(); ++i) CHECK(se[i].slot == lo[i].slot + 3);
}

TEST_CASE("best-effort shaping strictly cuts edge events on a square wave") {
  LoadTrace trace;
  for (int i = 0; i < 32; ++i) trace.load_kw.push_back(i % 4 < 2 ? 1.0 : 2.5);
  BatterySpec spec;
  spec.b_max_kwh = 20.0;
  spec.b_initial_kwh = 10.0;
  spec.p_charge_kw = 3.0;
  spec.p_discharge_kw = 3.0;
  auto shaped = policies::best_effort_policy(trace, spec);
  const auto raw_events = edge_detector(trace.load_kw, 1.0);
  const auto shaped_events = edge_detector(shaped.grid.y_kw, 1.0);
  CHECK(shaped_events.size() < raw_events.size());
}

TEST_CASE("peak recovery: constant profile yields no candidates") {
  std::vector<double> y(16, 2.0);
  auto r = peak_recovery(y, 0.5);
  CHECK(r.candidates.empty());
}

TEST_CASE("peak recovery: off-grid profile is rejected") {
  std::vector<double> y{0.5, 0.7};
  CHECK_THROWS_AS(peak_recovery(y, 0.5), ModelError);
}

TEST_CASE("peak recovery: hold stepping flags an impulse") {
  LoadTrace trace;
  trace.load_kw = {0.2, 0.2, 0.2, 1.8, 0.2, 0.2, 0.2, 0.2};
  BatterySpec spec;
  spec.b_max_kwh = 4.0;
  spec.b_initial_kwh = 2.0;
  spec.p_charge_kw = 0.5;
  spec.p_discharge_kw = 0.5;
  policies::SteppingSpec st{0.5, policies::SteppingSpec::Variant::hold, 0.0};
  auto shaped = policies::stepping_policy(trace, spec, st, 1);
  auto found = peak_recovery(shaped.grid.y_kw, 0.5);
  auto score = score_candidates(found.candidates, {3}, 1);
  CHECK(score.recall == doctest::Approx(1.0));
}

TEST_CASE("peak recovery: random stepping recall never beats hold") {
  LoadTrace trace;
  for (int i = 0; i < 40; ++i) trace.load_kw.push_back(0.2);
  trace.load_kw[10] = 1.8;
  trace.load_kw[25] = 1.8;
  BatterySpec spec;
  spec.b_max_kwh = 6.0;
  spec.b_initial_kwh = 3.0;
  spec.p_charge_kw = 0.5;
  spec.p_discharge_kw = 0.5;
  const std::vector<int> truth{10, 25};
  double hold_recall = 0.0, random_recall = 0.0;
  const int trials = 20;
  for (int seed = 0; seed < trials; ++seed) {
    policies::SteppingSpec hold{0.5, policies::SteppingSpec::Variant::hold, 0.0};
    policies::SteppingSpec rnd{0.5, policies::SteppingSpec::Variant::random, 0.0};
    auto h = policies::stepping_policy(trace, spec, hold, seed);
    auto r = policies::stepping_policy(trace, spec, rnd, seed);
    hold_recall += score_candidates(peak_recovery(h.grid.y_kw, 0.5).candidates, truth, 1).recall;
    random_recall +=
        score_candidates(peak_recovery(r.grid.y_kw, 0.5).candidates, truth, 1).recall;
  }
  CHECK(random_recall <= hold_recall + 1e-9);
}

TEST_CASE("lrt: identical channel pairs cannot discriminate") {
  info::HypothesisModel hyp{bernoulli(0.4), bernoulli(0.4), 0.0};
  auto q = info::ChannelMatrix::identity({0.0, 1.0});
  auto rep = estimate_error_exponents(hyp, q, q, 100, 2000, 0.05, 5);
  CHECK(rep.type1 == doctest::Approx(0.05).epsilon(0.2));
  CHECK(rep.type2 == doctest::Approx(0.95).epsilon(0.05));
}

TEST_CASE("lrt decision thresholds the log-likelihood ratio") {
  info::HypothesisModel hyp{bernoulli(0.2), bernoulli(0.8), 0.0};
  auto q = info::ChannelMatrix::identity({0.0, 1.0});
  // mostly zeros: h0 is far more likely
  std::vector<double> mostly_zero{0, 0, 0, 1, 0, 0, 0, 0};
  CHECK(lrt_decides_h0(mostly_zero, hyp, q, q, 0.0));
  std::vector<double> mostly_one{1, 1, 1, 0, 1, 1, 1, 1};
  CHECK(!lrt_decides_h0(mostly_one, hyp, q, q, 0.0));
}

TEST_CASE("exponent estimate approaches the divergence of the output laws") {
  info::HypothesisModel hyp{bernoulli(0.2), bernoulli(0.8), 0.0};
  auto q = info::ChannelMatrix::identity({0.0, 1.0});
  auto rep = estimate_error_exponents(hyp, q, q, 1000, 2000, 0.05, 7);
  CHECK(rep.type1 <= 0.05 + 0.02);
  CHECK(std::fabs(rep.exponent_bits - 1.2) < 0.3);
  CHECK(rep.ci_low_bits <= rep.exponent_bits);
  CHECK(rep.ci_high_bits >= rep.exponent_bits);
}

TEST_CASE("exponent estimates sharpen as n grows") {
  info::HypothesisModel hyp{bernoulli(0.2), bernoulli(0.8), 0.0};
  auto q = info::ChannelMatrix::identity({0.0, 1.0});
  double prev_err = 1e9;
  for (int n : {1000, 10000, 100000}) {
    auto rep = estimate_error_exponents(hyp, q, q, n, 1500, 0.05, 11);
    const double err = std::fabs(rep.exponent_bits - 1.2);
    CHECK(err <= prev_err + 0.05);
    prev_err = err;
  }
  // at the largest n, the threshold correction is tiny
  auto rep = estimate_error_exponents(hyp, q, q, 100000, 1500, 0.05, 11);
  CHECK(std::fabs(rep.exponent_bits - 1.2) < 0.05);
}

TEST_CASE("shaped channels reduce the detection exponent") {
  info::HypothesisModel hyp{bernoulli(0.2), bernoulli(0.8), 0.25};
  auto raw = info::ChannelMatrix::identity({0.0, 1.0});
  auto shaped = info::min_kl_channel(hyp, 1.0);
  auto raw_rep = estimate_error_exponents(hyp, raw, raw, 4000, 1500, 0.05, 13);
  auto shaped_rep = estimate_error_exponents(hyp, shaped.channel_h0, shaped.channel_h1,
                                             4000, 1500, 0.05, 13);
  CHECK(shaped_rep.exponent_bits < raw_rep.exponent_bits);
  CHECK(std::fabs(shaped_rep.exponent_bits - shaped.divergence_bits) < 0.1);
}

TEST_CASE("scoring: tolerance window of one slot") {
  auto s = score_candidates({4, 11}, {5, 20}, 1);
  CHECK(s.recall == doctest::Approx(0.5));
  CHECK(s.precision == doctest::Approx(0.5));
}
