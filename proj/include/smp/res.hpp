#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "smp/errors.hpp"
#include "smp/rng.hpp"
#include "smp/trace.hpp"

namespace smp {

// Generation model, used both for renewable generation and as a synthetic
// load generator:
//   none       - all zero
//   trace      - take the series embedded in the LoadTrace
//   bernoulli  - i.i.d. peak_kw * Bernoulli(rate)
//   markov     - first-order chain over `levels`, optionally with one
//                transition matrix per feature (time-of-day bucket etc.)
struct ResModel {
  enum class Kind { none, trace, bernoulli, markov };

  Kind kind = Kind::none;
  double rate = 0.0;     // bernoulli success probability
  double peak_kw = 0.0;  // bernoulli level
  std::vector<double> levels;
  std::vector<std::vector<std::vector<double>>> transitions;  // [feature][from][to]
  std::vector<int> feature_of_slot;  // empty = always feature 0
  int initial_state = 0;

  void validate() const {
    switch (kind) {
      case Kind::none:
      case Kind::trace:
        return;
      case Kind::bernoulli:
        if (rate < 0.0 || rate > 1.0) throw ModelError("res: rate outside [0,1]");
        if (peak_kw < 0.0) throw ModelError("res: negative peak");
        return;
      case Kind::markov: {
        if (levels.empty()) throw ModelError("res: markov model without levels");
        if (transitions.empty()) throw ModelError("res: markov model without transitions");
        const std::size_t n = levels.size();
        for (const auto& matrix : transitions) {
          if (matrix.size() != n) throw ModelError("res: transition matrix size mismatch");
          for (const auto& row : matrix) {
            if (row.size() != n) throw ModelError("res: transition row size mismatch");
            double sum = 0.0;
            for (double p : row) {
              if (p < 0.0) throw ModelError("res: negative transition probability");
              sum += p;
            }
            if (std::fabs(sum - 1.0) > 1e-9)
              throw ModelError("res: transition row does not sum to 1");
          }
        }
        if (initial_state < 0 || initial_state >= int(n))
          throw ModelError("res: initial state out of range");
        for (int f : feature_of_slot)
          if (f < 0 || f >= int(transitions.size()))
            throw ModelError("res: feature index out of range");
        return;
      }
    }
  }

  int feature_at(int t) const {
    if (feature_of_slot.empty()) return 0;
    return feature_of_slot[std::size_t(t) % feature_of_slot.size()];
  }

  // Generate `n` slots. For Kind::trace the series is taken from `from`.
  std::vector<double> generate(int n, const LoadTrace* from, std::uint64_t seed) const {
    validate();
    std::vector<double> out(std::size_t(n), 0.0);
    switch (kind) {
      case Kind::none:
        break;
      case Kind::trace: {
        if (from == nullptr || !from->has_res())
          throw ModelError("res: trace model but no res series present");
        if (from->size() < n) throw ModelError("res: trace shorter than horizon");
        for (int t = 0; t < n; ++t) out[t] = from->res_kw[t];
        break;
      }
      case Kind::bernoulli: {
        Rng rng(seed);
        for (int t = 0; t < n; ++t) out[t] = rng.bernoulli(rate) ? peak_kw : 0.0;
        break;
      }
      case Kind::markov: {
        Rng rng(seed);
        int s = initial_state;
        out[0] = levels[s];
        for (int t = 1; t < n; ++t) {
          const auto& row = transitions[feature_at(t - 1)][s];
          double u = rng.next_double();
          int next = int(row.size()) - 1;
          double acc = 0.0;
          for (std::size_t j = 0; j < row.size(); ++j) {
            acc += row[j];
            if (u < acc) {
              next = int(j);
              break;
            }
          }
          s = next;
          out[t] = levels[s];
        }
        break;
      }
    }
    return out;
  }
};

inline LoadTrace generate_synthetic_trace(const ResModel& generator, int n,
                                          double slot_hours, std::uint64_t seed) {
  if (n <= 0) throw ModelError("synthetic trace: horizon must be positive");
  LoadTrace trace;
  trace.slot_hours = slot_hours;
  trace.load_kw = generator.generate(n, nullptr, seed);
  trace.validate();
  return trace;
}

}  // namespace smp
