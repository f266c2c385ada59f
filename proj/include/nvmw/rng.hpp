#pragma once

// Platform-stable random numbers for synthetic data.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. Uniform doubles take the top 53 bits of each draw. Poisson
// variates use sequential inversion for mean < 10 and Hormann's PTRS
// transformed rejection otherwise, so no implementation-defined standard
// distribution is involved.

#include <cstdint>
#include <random>

namespace nvmw::rng {

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform();

  /// Poisson variate with the given mean (mean >= 0).
  std::int64_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent stream seed for task `index` from a parent seed.
std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace nvmw::rng
