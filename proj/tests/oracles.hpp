#pragma once

// Brute-force reference implementations used to freeze expected values.
// They share no code with the library beyond the Matrix container.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "invml/matrix.hpp"

namespace oracle {

using invml::Matrix;

inline double dist(const Matrix& a, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    const double d = a(i, c) - a(j, c);
    s += d * d;
  }
  return std::sqrt(s);
}

/// 1-based rank of j among all l != i by distance from i, lower index first on ties.
/// Counts predecessors directly instead of sorting.
inline std::size_t rank(const Matrix& a, std::size_t i, std::size_t j) {
  const double dij = dist(a, i, j);
  std::size_t r = 1;
  for (std::size_t l = 0; l < a.rows(); ++l) {
    if (l == i || l == j) continue;
    const double dil = dist(a, i, l);
    if (dil < dij || (dil == dij && l < j)) ++r;
  }
  return r;
}

inline std::vector<std::vector<std::size_t>> rank_table(const Matrix& a) {
  const std::size_t n = a.rows();
  std::vector<std::vector<std::size_t>> r(n, std::vector<std::size_t>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) r[i][j] = rank(a, i, j);
    }
  }
  return r;
}

/// Intrusions of `to`-space neighbours penalised by their `from`-space rank.
inline double neighbourhood_score(const Matrix& from, const Matrix& to, std::size_t k1,
                                  std::size_t k2) {
  const std::size_t n = from.rows();
  const double m = static_cast<double>(n);
  const auto rf = rank_table(from);
  const auto rt = rank_table(to);
  double total = 0.0;
  for (std::size_t k = k1; k <= k2; ++k) {
    double penalty = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const bool in_to = rt[i][j] <= k;
        const bool in_from = rf[i][j] <= k;
        if (in_to && !in_from) penalty += static_cast<double>(rf[i][j]) - static_cast<double>(k);
      }
    }
    const double kk = static_cast<double>(k);
    total += 1.0 - 2.0 / (m * kk * (2.0 * m - 3.0 * kk - 1.0)) * penalty;
  }
  return total / static_cast<double>(k2 - k1 + 1);
}

inline double trust(const Matrix& x, const Matrix& z, std::size_t k1, std::size_t k2) {
  return neighbourhood_score(x, z, k1, k2);
}

inline double cont(const Matrix& x, const Matrix& z, std::size_t k1, std::size_t k2) {
  return neighbourhood_score(z, x, k1, k2);
}

/// (k_min, k_max) over input-space k-neighbourhoods; zero-distance pairs skipped.
inline std::pair<double, double> bi_lipschitz(const Matrix& x, const Matrix& z, std::size_t k) {
  const std::size_t n = x.rows();
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || rank(x, i, j) > k) continue;
      const double dx = dist(x, i, j);
      const double dz = dist(z, i, j);
      if (dx == 0.0 || dz == 0.0) continue;
      row = std::max(row, std::max(dz / dx, dx / dz));
      any = true;
    }
    if (!any) continue;
    lo = std::min(lo, row);
    hi = std::max(hi, row);
  }
  return {lo, hi};
}

inline double latent_mse(const Matrix& x, const Matrix& z) {
  const double n = static_cast<double>(x.rows());
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.rows(); ++j) s += std::abs(dist(x, i, j) - dist(z, i, j));
  }
  return std::sqrt(s / (n * n));
}

inline double rmse(const Matrix& x, const Matrix& y) {
  const double n = static_cast<double>(x.rows());
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t c = 0; c < x.cols(); ++c) s += (x(i, c) - y(i, c)) * (x(i, c) - y(i, c));
  }
  return std::sqrt(s / (n * n));
}

inline double max_norm_error(const std::vector<std::pair<Matrix, Matrix>>& layers) {
  double worst = 0.0;
  for (const auto& [a, b] : layers) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t c = 0; c < a.cols(); ++c) worst = std::max(worst, std::abs(a(i, c) - b(i, c)));
    }
  }
  return worst;
}

/// Plain sum over (i, j in N_i) of |d_X - d_Z|.
inline double lis(const Matrix& x, const Matrix& z, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.rows(); ++j) {
      if (i != j && rank(x, i, j) <= k) s += std::abs(dist(x, i, j) - dist(z, i, j));
    }
  }
  return s;
}

/// -sum over ordered non-neighbour pairs closer than `radius` of log(1 + d_Z).
inline double push(const Matrix& x, const Matrix& z, std::size_t k, double radius) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.rows(); ++j) {
      if (i == j || rank(x, i, j) <= k) continue;
      const double d = dist(z, i, j);
      if (d < radius) s -= std::log1p(d);
    }
  }
  return s;
}

/// Largest singular value from the eigenvalues of a^T a by cyclic Jacobi.
inline double sigma_max(const Matrix& a) {
  const std::size_t n = a.cols();
  std::vector<std::vector<double>> s(n, std::vector<double>(n, 0.0));
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      for (std::size_t r = 0; r < a.rows(); ++r) s[p][q] += a(r, p) * a(r, q);
    }
  }
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += s[p][q] * s[p][q];
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (s[p][q] == 0.0) continue;
        const double theta = (s[q][q] - s[p][p]) / (2.0 * s[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t r = 0; r < n; ++r) {
          const double sp = s[r][p];
          const double sq = s[r][q];
          s[r][p] = c * sp - sn * sq;
          s[r][q] = sn * sp + c * sq;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double sp = s[p][r];
          const double sq = s[q][r];
          s[p][r] = c * sp - sn * sq;
          s[q][r] = sn * sp + c * sq;
        }
      }
    }
  }
  double best = 0.0;
  for (std::size_t p = 0; p < n; ++p) best = std::max(best, s[p][p]);
  return std::sqrt(std::max(best, 0.0));
}

/// sigma_max(W^T W - I).
inline double orth_defect(const Matrix& w) {
  Matrix g = invml::matmul_tn(w, w);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return sigma_max(g);
}

}  // namespace oracle
