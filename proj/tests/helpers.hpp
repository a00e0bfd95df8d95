#pragma once

#include <cmath>
#include <cstdint>

#include "invml/linalg.hpp"
#include "invml/matrix.hpp"
#include "invml/random.hpp"

namespace testing {

using invml::Matrix;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  invml::Rng rng(seed);
  return rng.gaussian(rows, cols);
}

inline Matrix random_orthogonal(std::size_t n, std::uint64_t seed) {
  return invml::qr_orthogonalize(random_matrix(n, n, seed));
}

/// Entries pushed at least `gap` away from zero, keeping the sign.
inline Matrix off_kink(Matrix a, double gap = 0.05) {
  for (double& v : a.data()) {
    if (std::abs(v) < gap) v = v < 0.0 ? v - gap : v + gap;
  }
  return a;
}

}  // namespace testing
