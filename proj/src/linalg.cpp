#include "invml/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "invml/error.hpp"
#include "invml/random.hpp"

namespace invml {
namespace {

double norm1(const Matrix& a) {
  double best = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += std::abs(a(i, j));
    best = std::max(best, s);
  }
  return best;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Matrix lu_inverse(const Matrix& w) {
  if (!w.is_square()) throw Error(ErrorCode::ShapeMismatch, "inverse of non-square matrix");
  const std::size_t n = w.rows();
  const double scale = max_abs(w);
  if (scale == 0.0) throw Error(ErrorCode::SingularMatrix, "zero matrix");
  const double pivot_floor = 1e-14 * scale;

  Matrix lu = w;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::abs(lu(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(lu(i, k)) > best) {
        best = std::abs(lu(i, k));
        p = i;
      }
    }
    if (best < pivot_floor) {
      throw Error(ErrorCode::SingularMatrix, "pivot " + std::to_string(best) + " at column " +
                                                 std::to_string(k));
    }
    if (p != k) {
      std::swap_ranges(lu.row(k).begin(), lu.row(k).end(), lu.row(p).begin());
      std::swap(perm[k], perm[p]);
    }
    const double pivot = lu(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu(i, k) / pivot;
      lu(i, k) = f;
      if (f == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
    }
  }

  // Solve L U x = P e_c column by column.
  Matrix inv(n, n);
  std::vector<double> col(n);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t i = 0; i < n; ++i) col[i] = perm[i] == c ? 1.0 : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = col[i];
      for (std::size_t j = 0; j < i; ++j) s -= lu(i, j) * col[j];
      col[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = col[i];
      for (std::size_t j = i + 1; j < n; ++j) s -= lu(i, j) * col[j];
      col[i] = s / lu(i, i);
    }
    for (std::size_t i = 0; i < n; ++i) inv(i, c) = col[i];
  }
  return inv;
}

}  // namespace

Matrix mat_inverse(const Matrix& w, double condition_cap) {
  Matrix inv = lu_inverse(w);
  const double cond = norm1(w) * norm1(inv);
  if (!std::isfinite(cond) || cond > condition_cap) {
    throw Error(ErrorCode::IllConditioned,
                "condition estimate " + std::to_string(cond) + " exceeds cap " +
                    std::to_string(condition_cap));
  }
  return inv;
}

double condition_number_1(const Matrix& w) { return norm1(w) * norm1(lu_inverse(w)); }

SpectralNormResult spectral_norm(const Matrix& w, std::size_t n_iter,
                                 std::optional<std::span<const double>> start) {
  if (n_iter == 0) throw Error(ErrorCode::InvalidArgument, "spectral_norm needs n_iter >= 1");
  if (max_abs(w) == 0.0) throw Error(ErrorCode::ZeroMatrix, "spectral norm of zero matrix");
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();

  std::vector<double> v(n);
  if (start && start->size() == n && norm2(*start) > 0.0) {
    std::copy(start->begin(), start->end(), v.begin());
  } else {
    Rng rng(kPowerIterationSeed);
    for (double& x : v) x = rng.normal();
  }
  double vn = norm2(v);
  for (double& x : v) x /= vn;

  std::vector<double> u(m);
  auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
    for (std::size_t i = 0; i < m; ++i) out[i] = dot(w.row(i), in);
  };
  auto apply_t = [&](const std::vector<double>& in, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto r = w.row(i);
      for (std::size_t j = 0; j < n; ++j) out[j] += r[j] * in[i];
    }
  };

  SpectralNormResult result;
  for (std::size_t it = 0; it < n_iter; ++it) {
    apply(v, u);
    double un = norm2(u);
    if (un == 0.0) {
      // Start vector in the null space; restart along a unit basis vector.
      std::fill(v.begin(), v.end(), 0.0);
      v[it % n] = 1.0;
      continue;
    }
    for (double& x : u) x /= un;
    apply_t(u, v);
    vn = norm2(v);
    for (double& x : v) x /= vn;
  }
  apply(v, u);
  const double sigma = norm2(u);
  if (sigma > 0.0) {
    for (double& x : u) x /= sigma;
  }
  result.value = sigma;
  result.left = std::move(u);
  result.right = std::move(v);
  return result;
}

Svd svd_jacobi(const Matrix& a) {
  if (a.rows() < a.cols()) {
    Svd t = svd_jacobi(transpose(a));
    return Svd{std::move(t.v), std::move(t.singular_values), std::move(t.u)};
  }
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  // Work on columns stored as rows of the transpose for contiguous access.
  Matrix cols = transpose(a);
  Matrix v = Matrix::identity(n);
  constexpr double eps = 1e-15;
  constexpr int kMaxSweeps = 100;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto cp = cols.row(p);
        auto cq = cols.row(q);
        const double alpha = dot(cp, cp);
        const double beta = dot(cq, cq);
        const double gamma = dot(cp, cq);
        if (std::abs(gamma) <= eps * std::sqrt(alpha * beta) || gamma == 0.0) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double xp = cp[i];
          const double xq = cq[i];
          cp[i] = c * xp - s * xq;
          cq[i] = s * xp + c * xq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double xp = v(i, p);
          const double xq = v(i, q);
          v(i, p) = c * xp - s * xq;
          v(i, q) = s * xp + c * xq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sv(n);
  for (std::size_t j = 0; j < n; ++j) sv[j] = norm2(cols.row(j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sv[x] > sv[y]; });

  Svd out{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.singular_values[k] = sv[j];
    // Fix the sign so the largest-magnitude entry of each right vector is positive.
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (std::abs(v(i, j)) > std::abs(v(arg, j))) arg = i;
    }
    const double sign = v(arg, j) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = sign * v(i, j);
    if (sv[j] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) out.u(i, k) = sign * cols(j, i) / sv[j];
    }
  }
  return out;
}

std::vector<double> singular_values(const Matrix& a) {
  if (a.rows() < a.cols()) return singular_values(transpose(a));
  if (a.cols() == 0) return {};
  if (a.rows() > 2 * a.cols()) {
    return svd_jacobi(thin_qr(a).r).singular_values;
  }
  return svd_jacobi(a).singular_values;
}

SvdRankResult svd_rank(const Matrix& z, double rel_tol) {
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "rank tolerance must lie in (0, 1)");
  }
  SvdRankResult result;
  result.tolerance_used = rel_tol;
  result.singular_values = singular_values(z);
  if (result.singular_values.empty()) return result;
  const double threshold = rel_tol * result.singular_values.front();
  for (double s : result.singular_values) {
    if (s > threshold) ++result.rank;
  }
  return result;
}

ThinQr thin_qr(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (m < n) throw Error(ErrorCode::ShapeMismatch, "thin_qr needs rows >= cols");

  // Householder vectors are stored column-wise in the transposed work buffer.
  Matrix work = transpose(a);  // n x m
  std::vector<std::vector<double>> reflectors;
  reflectors.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto col = work.row(k);
    double norm = 0.0;
    for (std::size_t i = k; i < m; ++i) norm += col[i] * col[i];
    norm = std::sqrt(norm);
    std::vector<double> h(m, 0.0);
    if (norm == 0.0) {
      reflectors.push_back(std::move(h));
      continue;
    }
    const double alpha = col[k] > 0.0 ? -norm : norm;
    for (std::size_t i = k; i < m; ++i) h[i] = col[i];
    h[k] -= alpha;
    double hn = 0.0;
    for (std::size_t i = k; i < m; ++i) hn += h[i] * h[i];
    if (hn > 0.0) {
      const double inv = 1.0 / std::sqrt(hn);
      for (std::size_t i = k; i < m; ++i) h[i] *= inv;
      for (std::size_t j = k; j < n; ++j) {
        auto cj = work.row(j);
        double d = 0.0;
        for (std::size_t i = k; i < m; ++i) d += h[i] * cj[i];
        for (std::size_t i = k; i < m; ++i) cj[i] -= 2.0 * d * h[i];
      }
    }
    reflectors.push_back(std::move(h));
  }

  ThinQr out{Matrix(m, n), Matrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i <= j; ++i) out.r(i, j) = work(j, i);
  }
  // Q = H_0 H_1 ... H_{n-1} applied to the first n unit vectors.
  Matrix qt(n, m);
  for (std::size_t j = 0; j < n; ++j) qt(j, j) = 1.0;
  for (std::size_t k = n; k-- > 0;) {
    const auto& h = reflectors[k];
    for (std::size_t j = 0; j < n; ++j) {
      auto qj = qt.row(j);
      double d = 0.0;
      for (std::size_t i = k; i < m; ++i) d += h[i] * qj[i];
      if (d == 0.0) continue;
      for (std::size_t i = k; i < m; ++i) qj[i] -= 2.0 * d * h[i];
    }
  }
  // Make diag(R) nonnegative.
  for (std::size_t j = 0; j < n; ++j) {
    if (out.r(j, j) < 0.0) {
      for (std::size_t c = j; c < n; ++c) out.r(j, c) = -out.r(j, c);
      for (double& x : qt.row(j)) x = -x;
    }
  }
  out.q = transpose(qt);
  return out;
}

Matrix qr_orthogonalize(const Matrix& w) {
  if (!w.is_square()) throw Error(ErrorCode::ShapeMismatch, "qr_orthogonalize needs square input");
  ThinQr qr = thin_qr(w);
  double rmax = 0.0;
  for (std::size_t i = 0; i < w.rows(); ++i) rmax = std::max(rmax, std::abs(qr.r(i, i)));
  for (std::size_t i = 0; i < w.rows(); ++i) {
    if (std::abs(qr.r(i, i)) <= 1e-12 * rmax || rmax == 0.0) {
      throw Error(ErrorCode::RankDeficient, "qr_orthogonalize: input is rank deficient");
    }
  }
  return std::move(qr.q);
}

Matrix pca_project(const Matrix& x, std::size_t target_dim) {
  if (target_dim > x.cols()) {
    throw Error(ErrorCode::InvalidArgument, "PCA target dimension exceeds column count");
  }
  Matrix centered = x;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) mean += x(i, j);
    mean /= static_cast<double>(std::max<std::size_t>(x.rows(), 1));
    for (std::size_t i = 0; i < x.rows(); ++i) centered(i, j) -= mean;
  }
  // Right singular vectors of the centered data from the covariance-free route:
  // reduce tall data by QR, then Jacobi on R (same right singular vectors).
  Matrix basis;
  if (centered.rows() >= centered.cols()) {
    const Matrix small = centered.rows() > 2 * centered.cols() ? thin_qr(centered).r : centered;
    basis = svd_jacobi(small).v;
  } else {
    // Wide data: pad with zero rows so the right basis is complete.
    Matrix padded(centered.cols(), centered.cols());
    for (std::size_t i = 0; i < centered.rows(); ++i) {
      std::copy_n(centered.row(i).begin(), centered.cols(), padded.row(i).begin());
    }
    basis = svd_jacobi(padded).v;
  }
  return matmul(centered, slice_cols(basis, 0, target_dim));
}

void solve_upper(const Matrix& r, std::span<double> b) {
  const std::size_t n = r.rows();
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= r(i, j) * b[j];
    b[i] = s / r(i, i);
  }
}

void solve_upper_transposed(const Matrix& r, std::span<double> b) {
  const std::size_t n = r.rows();
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t j = 0; j < i; ++j) s -= r(j, i) * b[j];
    b[i] = s / r(i, i);
  }
}

}  // namespace invml
