#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "invml/matrix.hpp"

namespace invml {

inline constexpr double kDefaultConditionCap = 1e12;

/// Inverse by LU with partial pivoting.
///
/// Throws SingularMatrix when a pivot falls below 1e-14 * max|w|, and
/// IllConditioned when the 1-norm condition number exceeds `condition_cap`.
Matrix mat_inverse(const Matrix& w, double condition_cap = kDefaultConditionCap);

/// 1-norm condition number estimate, computed from the explicit inverse.
double condition_number_1(const Matrix& w);

struct SpectralNormResult {
  double value = 0.0;
  std::vector<double> left;   // u, unit length, w v = value * u
  std::vector<double> right;  // v, unit length
};

inline constexpr std::uint64_t kPowerIterationSeed = 0x5eed5eedULL;

/// Largest singular value by power iteration on w^T w.
///
/// The start vector is drawn from a fixed-seed generator unless `start` is
/// supplied. Throws ZeroMatrix for an all-zero input.
SpectralNormResult spectral_norm(const Matrix& w, std::size_t n_iter = 50,
                                 std::optional<std::span<const double>> start = std::nullopt);

struct Svd {
  Matrix u;                            // rows x k, orthonormal columns
  std::vector<double> singular_values; // k = min(rows, cols), nonincreasing
  Matrix v;                            // cols x k, orthonormal columns
};

/// Thin SVD by one-sided (Hestenes) Jacobi rotations.
Svd svd_jacobi(const Matrix& a);

/// Singular values only; tall inputs are reduced by QR first.
std::vector<double> singular_values(const Matrix& a);

struct SvdRankResult {
  std::vector<double> singular_values;
  std::size_t rank = 0;
  double tolerance_used = 0.0;
};

/// Numerical rank: count of singular values above rel_tol * sigma_max.
SvdRankResult svd_rank(const Matrix& z, double rel_tol = 1e-3);

struct ThinQr {
  Matrix q;  // rows x cols
  Matrix r;  // cols x cols, upper triangular with nonnegative diagonal
};

/// Householder QR of a matrix with rows >= cols.
ThinQr thin_qr(const Matrix& a);

/// Q factor of a square full-rank matrix, with R's diagonal made positive.
Matrix qr_orthogonalize(const Matrix& w);

/// Centers columns and projects onto the top `target_dim` principal axes.
Matrix pca_project(const Matrix& x, std::size_t target_dim);

/// Solves R x = b for upper triangular R (b is overwritten with x).
void solve_upper(const Matrix& r, std::span<double> b);
/// Solves R^T x = b for upper triangular R.
void solve_upper_transposed(const Matrix& r, std::span<double> b);

}  // namespace invml
