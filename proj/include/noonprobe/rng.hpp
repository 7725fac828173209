#pragma once

// Seeded random numbers with our own distribution code, so sampled datasets
// are reproducible across standard libraries and thread counts.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace noonprobe {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Independent stream for a work item; mixing keeps streams decorrelated.
  static Rng substream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return Rng(z ^ (z >> 31));
  }

  double uniform() {  // [0,1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  // Poisson sampling: CDF inversion for small means, Hormann's PTRD
  // transformed rejection for large ones.
  long long poisson(double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean))
      throw std::invalid_argument("poisson: mean must be finite and >= 0");
    if (mean == 0.0) return 0;
    if (mean < 30.0) return poisson_inversion(mean);
    return poisson_ptrd(mean);
  }

 private:
  std::mt19937_64 eng_;

  long long poisson_inversion(double mean) {
    const double target = uniform();
    double p = std::exp(-mean), cdf = p;
    long long k = 0;
    while (cdf < target && k < 1000) {
      ++k;
      p *= mean / k;
      cdf += p;
    }
    return k;
  }

  long long poisson_ptrd(double mean) {
    const double smu = std::sqrt(mean);
    const double b = 0.931 + 2.53 * smu;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::abs(u);
      const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
      if (us >= 0.07 && v <= v_r) return static_cast<long long>(kf);
      if (kf < 0.0 || (us < 0.013 && v > us)) continue;
      const double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
      const double rhs = kf * std::log(mean) - mean - std::lgamma(kf + 1.0);
      if (lhs <= rhs) return static_cast<long long>(kf);
    }
  }
};

}  // namespace noonprobe
