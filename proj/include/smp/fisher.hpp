#pragma once

#include <cmath>
#include <vector>

#include "smp/errors.hpp"

namespace smp::info {

// Additive, load-independent report noise Y_t = X_t + N_t with N_t i.i.d.
// from a differentiable density. The per-sample location score is
// analytic for the supported families.
struct NoiseSpec {
  enum class Family { gaussian, laplace, logistic, uniform };
  Family family = Family::gaussian;
  double scale = 1.0;  // sigma / b / s depending on family

  void validate() const {
    if (scale <= 0.0) throw ModelError("noise: scale must be positive");
  }
};

// Fisher information of the n-slot observation about the load sequence:
// the cross terms vanish for independent per-slot noise, so the matrix is
// diagonal with the per-sample information on the diagonal, and the
// attacker's unbiased estimation error is bounded below by the trace of
// its inverse.
struct FisherReport {
  int n = 0;
  double per_sample = 0.0;

  std::vector<double> diagonal() const { return std::vector<double>(n, per_sample); }
  double cr_trace_bound() const { return double(n) / per_sample; }
};

inline FisherReport fisher_info_additive(const NoiseSpec& noise, int n) {
  noise.validate();
  if (n < 1) throw ModelError("fisher: n must be positive");
  FisherReport rep;
  rep.n = n;
  switch (noise.family) {
    case NoiseSpec::Family::gaussian:
      rep.per_sample = 1.0 / (noise.scale * noise.scale);
      break;
    case NoiseSpec::Family::laplace:
      rep.per_sample = 1.0 / (noise.scale * noise.scale);
      break;
    case NoiseSpec::Family::logistic:
      rep.per_sample = 1.0 / (3.0 * noise.scale * noise.scale);
      break;
    case NoiseSpec::Family::uniform:
      throw ModelError("fisher: unsupported density (uniform is not differentiable)");
  }
  return rep;
}

}  // namespace smp::info
