#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "smp/errors.hpp"
#include "smp/rng.hpp"
#include "smp/trace.hpp"

namespace smp::smdm {

// Per-meter report noise for differentially private aggregation across a
// group of K meters: each meter adds the difference of two gamma draws
// with shape 1/K, so the group total is Laplace(lambda) distributed.
struct DpSpec {
  double lambda = 1.0;  // Laplace scale of the aggregate noise
  int group_size = 1;   // K meters sharing the aggregate

  static DpSpec from_epsilon(double sensitivity, double epsilon, int k) {
    if (epsilon <= 0.0) throw ModelError("dp: epsilon must be positive");
    if (sensitivity <= 0.0) throw ModelError("dp: sensitivity must be positive");
    DpSpec s;
    s.lambda = sensitivity / epsilon;
    s.group_size = k;
    s.validate();
    return s;
  }

  void validate() const {
    if (lambda <= 0.0) throw ModelError("dp: lambda must be positive");
    if (group_size < 1) throw ModelError("dp: group size must be at least 1");
  }

  // per-meter noise variance 2*lambda^2/K
  double meter_variance() const {
    return 2.0 * lambda * lambda / double(group_size);
  }
};

inline double gamma_dp_noise(const DpSpec& spec, Rng& rng) {
  spec.validate();
  const double shape = 1.0 / double(spec.group_size);
  return rng.gamma(shape, spec.lambda) - rng.gamma(shape, spec.lambda);
}

inline double gamma_dp_noise(const DpSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  return gamma_dp_noise(spec, rng);
}

// Meter `meter_id` obfuscates its whole series with an independent stream
// derived from the base seed.
inline std::vector<double> obfuscate_series(const std::vector<double>& load_kw,
                                            const DpSpec& spec, std::uint64_t seed,
                                            std::uint64_t meter_id = 0) {
  Rng rng(derive_seed(seed, meter_id));
  std::vector<double> out;
  out.reserve(load_kw.size());
  for (double x : load_kw) out.push_back(x + gamma_dp_noise(spec, rng));
  return out;
}

// ---- zero-sum masking ----------------------------------------------------
// Masks live in integer milliwatts so the cancellation is exact; cyclic
// differences keep every mask bounded by 2*range.

inline long long to_milliwatts(double kw) { return std::llround(kw * 1e6); }
inline double from_milliwatts(long long mw) { return double(mw) / 1e6; }

inline std::vector<long long> zero_sum_masks(int k, double range_kw, std::uint64_t seed) {
  if (k < 2) throw ModelError("masking: need at least 2 meters");
  if (range_kw < 0.0) throw ModelError("masking: negative range");
  Rng rng(seed);
  const long long range_mw = to_milliwatts(range_kw);
  std::vector<long long> r(k);
  for (auto& v : r)
    v = range_mw == 0 ? 0 : (long long)(rng.next_u64() % (2 * range_mw + 1)) - range_mw;
  std::vector<long long> masks(k);
  for (int i = 0; i < k; ++i) masks[i] = r[i] - r[(i + 1) % k];
  return masks;
}

// Sum of masked readings; the masks cancel so this equals the true total
// bit-exactly in the milliwatt domain.
inline double aggregate_masked(const std::vector<double>& readings_kw,
                               const std::vector<long long>& masks_mw) {
  if (readings_kw.size() != masks_mw.size())
    throw ModelError("masking: readings/masks size mismatch");
  long long total = 0;
  for (std::size_t i = 0; i < readings_kw.size(); ++i)
    total += to_milliwatts(readings_kw[i]) + masks_mw[i];
  return from_milliwatts(total);
}

// ---- aggregate-accuracy sizing -------------------------------------------

struct SizingParams {
  double confidence_width = 1.0;   // w
  double obfuscation_peak = 1.0;   // v
  double noise_variance = 1.0;     // Var[N]
  double allowed_deviation = 1.0;  // d

  void validate() const {
    if (confidence_width <= 0.0 || obfuscation_peak <= 0.0 || noise_variance <= 0.0 ||
        allowed_deviation <= 0.0)
      throw ModelError("sizing: all parameters must be positive");
  }
};

// Number of meters needed before the aggregate settles inside the allowed
// deviation: ceil of (w*v*Var[N]/d)^2. (The printed formula's units are
// odd, but it is implemented verbatim.)
inline long long required_meter_count(const SizingParams& p) {
  p.validate();
  const double base =
      p.confidence_width * p.obfuscation_peak * p.noise_variance / p.allowed_deviation;
  return (long long)std::ceil(base * base);
}

// ---- downsampling ----------------------------------------------------------

// Block means with the slot duration stretched by `factor`; a partial tail
// block is zero-padded so total energy is conserved exactly.
inline LoadTrace downsample(const LoadTrace& trace, int factor) {
  trace.validate();
  if (factor < 1) throw ModelError("downsample: factor must be >= 1");
  if (factor > trace.size()) throw ModelError("downsample: factor exceeds trace length");
  if (factor == 1) return trace;

  auto shrink = [&](const std::vector<double>& v) {
    std::vector<double> out;
    for (std::size_t start = 0; start < v.size(); start += factor) {
      const std::size_t end = std::min(start + std::size_t(factor), v.size());
      double s = 0.0;
      for (std::size_t t = start; t < end; ++t) s += v[t];
      out.push_back(s / double(factor));
    }
    return out;
  };

  LoadTrace out;
  out.slot_hours = trace.slot_hours * factor;
  out.load_kw = shrink(trace.load_kw);
  if (trace.has_res()) out.res_kw = shrink(trace.res_kw);
  if (trace.has_appliances()) {
    out.appliance_names = trace.appliance_names;
    for (const auto& a : trace.appliance_kw) out.appliance_kw.push_back(shrink(a));
  }
  return out;
}

}  // namespace smp::smdm
