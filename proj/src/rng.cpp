#include "nvmw/rng.hpp"

#include <cmath>
#include <stdexcept>

#include "nvmw/error.hpp"

namespace nvmw::rng {

double Generator::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::int64_t Generator::poisson(double mean) {
  if (!(mean >= 0) || !std::isfinite(mean))
    throw Error(ErrorCode::Validation, "Poisson mean must be finite and >= 0");
  if (mean == 0) return 0;

  if (mean < 10) {
    const double u = uniform();
    std::int64_t k = 0;
    double p = std::exp(-mean);
    double cdf = p;
    while (u > cdf && k < 1000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }

  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2);

  for (;;) {
    const double u = uniform() - 0.5;
    const double v = uniform();
    const double us = 0.5 - std::abs(u);
    const auto k = static_cast<std::int64_t>(std::floor((2 * a / us + b) * u + mean + 0.43));
    if (us >= 0.07 && v <= vr) return k;
    if (k < 0 || (us < 0.013 && v > us)) continue;
    const double lhs = std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b);
    const double rhs = -mean + static_cast<double>(k) * loglam -
                       std::lgamma(static_cast<double>(k) + 1.0);
    if (lhs <= rhs) return k;
  }
}

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over seed XOR a Weyl step of the index.
  std::uint64_t z = seed ^ ((index + 1) * 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace nvmw::rng
