#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "invml/matrix.hpp"

namespace invml {

/// Seeded generator with platform-independent uniform/normal conversions.
///
/// std::mt19937_64 output is fixed by the standard; the distributions in
/// <random> are not, so they are implemented here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n);
  double normal();

  Matrix gaussian(std::size_t rows, std::size_t cols, double stddev = 1.0);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace invml
