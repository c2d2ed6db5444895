#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "kbo/core.hpp"

namespace kbo::test {

// Seeded generators for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  std::size_t size(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(eng_); }
  std::vector<double> vec(std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (double& x : v) x = real(lo, hi);
    return v;
  }
  ParticleEnsemble ensemble(std::size_t n, std::size_t dim, double lo, double hi) {
    return ParticleEnsemble(vec(n * dim, lo, hi), dim);
  }

 private:
  std::mt19937_64 eng_;
};

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

}  // namespace kbo::test
