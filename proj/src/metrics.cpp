#include "invml/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "invml/error.hpp"
#include "invml/random.hpp"

namespace invml {
namespace {

void require_rows(const Matrix& x, const Matrix& z, const char* what) {
  if (x.rows() != z.rows()) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": row counts differ");
  }
}

/// Indices of all other points sorted by distance to `i` (ties: lower index).
void sorted_order(const Matrix& x, std::size_t i, std::vector<std::pair<double, std::size_t>>& buf,
                  std::vector<std::size_t>& order) {
  const std::size_t n = x.rows();
  buf.clear();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) buf.emplace_back(squared_distance(x.row(i), x.row(j)), j);
  }
  std::sort(buf.begin(), buf.end());
  order.resize(buf.size());
  for (std::size_t r = 0; r < buf.size(); ++r) order[r] = buf[r].second;
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(10);
  os << *v;
  return os.str();
}

std::string fmt(double v) { return fmt(std::optional<double>(v)); }

void validate_labels(const Matrix& z, std::span<const int> labels, std::size_t folds) {
  if (labels.size() != z.rows()) {
    throw Error(ErrorCode::CountMismatch, "label count differs from sample count");
  }
  if (folds < 2 || z.rows() < folds) {
    throw Error(ErrorCode::DegenerateFold, "too few samples for " + std::to_string(folds) + " folds");
  }
  for (int l : labels) {
    if (l < 0) throw Error(ErrorCode::InvalidArgument, "negative label");
  }
}

}  // namespace

std::string csv_header() {
  return "layer,rmse,mne,trust,cont,k_min,k_max,l_mse,acc_logistic,acc_knn,rank,k1,k2";
}

std::string to_csv_row(const MetricsReport& r) {
  std::ostringstream os;
  os << r.layer << ',' << fmt(r.rmse) << ',' << fmt(r.mne) << ',' << fmt(r.trust) << ','
     << fmt(r.cont) << ',' << fmt(r.k_min) << ',' << fmt(r.k_max) << ',' << fmt(r.l_mse) << ','
     << fmt(r.acc_logistic) << ',' << fmt(r.acc_knn) << ','
     << (r.rank_sparsity ? std::to_string(*r.rank_sparsity) : std::string()) << ',' << r.k1
     << ',' << r.k2;
  return os.str();
}

double rmse(const Matrix& x, const Matrix& x_hat) {
  require_same_shape(x, x_hat, "rmse");
  const double n = static_cast<double>(x.rows());
  if (x.rows() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) s += squared_distance(x.row(i), x_hat.row(i));
  return std::sqrt(s / (n * n));
}

double mne(std::span<const LayerRoundTrip> layers) {
  double worst = 0.0;
  for (const auto& l : layers) worst = std::max(worst, max_abs_diff(l.input, l.reconstruction));
  return worst;
}

NeighborhoodScores trust_and_continuity(const Matrix& x, const Matrix& z, std::size_t k1,
                                        std::size_t k2) {
  require_rows(x, z, "trust/continuity");
  const std::size_t n = x.rows();
  const double m = static_cast<double>(n);
  if (k1 < 2 || k1 > k2 || k2 + 1 >= n || 2.0 * m - 3.0 * static_cast<double>(k2) - 1.0 <= 0.0) {
    throw Error(ErrorCode::KRangeInvalid, "need 2 <= k1 <= k2 < (2M-1)/3 with M=" +
                                              std::to_string(n));
  }
  const std::size_t span = k2 - k1 + 1;
  std::vector<double> trust_sum(span, 0.0);
  std::vector<double> cont_sum(span, 0.0);

  std::vector<std::pair<double, std::size_t>> buf;
  std::vector<std::size_t> order_x, order_z;
  std::vector<std::size_t> rank_x(n), rank_z(n);
  for (std::size_t i = 0; i < n; ++i) {
    sorted_order(x, i, buf, order_x);
    sorted_order(z, i, buf, order_z);
    for (std::size_t r = 0; r < order_x.size(); ++r) rank_x[order_x[r]] = r + 1;
    for (std::size_t r = 0; r < order_z.size(); ++r) rank_z[order_z[r]] = r + 1;
    for (std::size_t k = k1; k <= k2; ++k) {
      double t = 0.0;
      double c = 0.0;
      for (std::size_t r = 0; r < k; ++r) {
        const std::size_t jz = order_z[r];
        if (rank_x[jz] > k) t += static_cast<double>(rank_x[jz] - k);
        const std::size_t jx = order_x[r];
        if (rank_z[jx] > k) c += static_cast<double>(rank_z[jx] - k);
      }
      trust_sum[k - k1] += t;
      cont_sum[k - k1] += c;
    }
  }

  NeighborhoodScores s;
  for (std::size_t k = k1; k <= k2; ++k) {
    const double kk = static_cast<double>(k);
    const double norm = 2.0 / (m * kk * (2.0 * m - 3.0 * kk - 1.0));
    s.trust += 1.0 - norm * trust_sum[k - k1];
    s.cont += 1.0 - norm * cont_sum[k - k1];
  }
  s.trust /= static_cast<double>(span);
  s.cont /= static_cast<double>(span);
  return s;
}

double trustworthiness(const Matrix& x, const Matrix& z, std::size_t k1, std::size_t k2) {
  return trust_and_continuity(x, z, k1, k2).trust;
}

double continuity(const Matrix& x, const Matrix& z, std::size_t k1, std::size_t k2) {
  return trust_and_continuity(x, z, k1, k2).cont;
}

BiLipschitz bi_lipschitz(const Matrix& x, const Matrix& z, const NeighborGraph& graph) {
  require_rows(x, z, "bi_lipschitz");
  if (graph.size() != x.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "neighbor graph size differs from sample count");
  }
  BiLipschitz out;
  out.k_min = std::numeric_limits<double>::infinity();
  out.k_max = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double row_max = 0.0;
    bool row_any = false;
    for (std::size_t r = 0; r < graph.k; ++r) {
      const std::size_t j = graph.neighbor(i, r);
      const double dx = distance(x.row(i), x.row(j));
      const double dz = distance(z.row(i), z.row(j));
      if (dx == 0.0 || dz == 0.0) {
        ++out.skipped_pairs;
        continue;
      }
      row_max = std::max(row_max, std::max(dz / dx, dx / dz));
      row_any = true;
    }
    if (!row_any) continue;
    any = true;
    out.k_min = std::min(out.k_min, row_max);
    out.k_max = std::max(out.k_max, row_max);
  }
  if (!any) {
    throw Error(ErrorCode::ZeroDistance, "every neighbour pair has a zero distance");
  }
  return out;
}

double latent_mse(const Matrix& x, const Matrix& z, std::uint64_t seed, std::size_t max_rows) {
  require_rows(x, z, "latent_mse");
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (rows.size() > max_rows) {
    Rng rng(seed);
    rng.shuffle(rows);
    rows.resize(max_rows);
    std::sort(rows.begin(), rows.end());
  }
  const std::size_t n = rows.size();
  if (n == 0) return 0.0;
  double s = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double dx = distance(x.row(rows[a]), x.row(rows[b]));
      const double dz = distance(z.row(rows[a]), z.row(rows[b]));
      s += 2.0 * std::abs(dx - dz);
    }
  }
  const double nn = static_cast<double>(n);
  return std::sqrt(s / (nn * nn));
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds,
                                          std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> fold(labels.size());
  std::size_t counter = 0;
  for (auto& [label, idx] : by_class) {
    rng.shuffle(idx);
    for (std::size_t i : idx) fold[i] = counter++ % folds;
  }
  return fold;
}

double acc_logistic_10fold(const Matrix& z, std::span<const int> labels, std::uint64_t seed,
                           const LogisticOptions& options) {
  validate_labels(z, labels, options.folds);
  const std::size_t classes =
      static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  const std::vector<std::size_t> fold = stratified_folds(labels, options.folds, seed);
  const std::size_t d = z.cols();

  double acc_total = 0.0;
  for (std::size_t f = 0; f < options.folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < z.rows(); ++i) (fold[i] == f ? test : train).push_back(i);
    std::vector<bool> seen(classes, false);
    std::size_t distinct = 0;
    for (std::size_t i : train) {
      if (!seen[static_cast<std::size_t>(labels[i])]) {
        seen[static_cast<std::size_t>(labels[i])] = true;
        ++distinct;
      }
    }
    if (test.empty() || distinct < 2) {
      throw Error(ErrorCode::DegenerateFold, "fold " + std::to_string(f) + " is degenerate");
    }

    // Standardise with training statistics; a trailing ones column is the bias.
    std::vector<double> mean(d, 0.0), stdev(d, 0.0);
    for (std::size_t i : train) {
      for (std::size_t j = 0; j < d; ++j) mean[j] += z(i, j);
    }
    for (double& v : mean) v /= static_cast<double>(train.size());
    for (std::size_t i : train) {
      for (std::size_t j = 0; j < d; ++j) stdev[j] += (z(i, j) - mean[j]) * (z(i, j) - mean[j]);
    }
    for (double& v : stdev) {
      v = std::sqrt(v / static_cast<double>(train.size()));
      if (v < 1e-12) v = 1.0;
    }
    auto features = [&](const std::vector<std::size_t>& rows) {
      Matrix f(rows.size(), d + 1);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t j = 0; j < d; ++j) f(r, j) = (z(rows[r], j) - mean[j]) / stdev[j];
        f(r, d) = 1.0;
      }
      return f;
    };
    const Matrix xtr = features(train);
    const Matrix xte = features(test);
    Matrix w(d + 1, classes);
    const double inv_n = 1.0 / static_cast<double>(train.size());
    for (std::size_t it = 0; it < options.iterations; ++it) {
      Matrix p = matmul(xtr, w);
      for (std::size_t r = 0; r < p.rows(); ++r) {
        auto row = p.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (double& v : row) {
          v = std::exp(v - mx);
          s += v;
        }
        for (double& v : row) v /= s;
        row[static_cast<std::size_t>(labels[train[r]])] -= 1.0;
      }
      Matrix grad = matmul_tn(xtr, p);
      grad *= inv_n;
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t c = 0; c < classes; ++c) grad(j, c) += options.l2 * w(j, c);
      }
      grad *= options.learning_rate;
      w -= grad;
    }
    const Matrix scores = matmul(xte, w);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < test.size(); ++r) {
      const auto row = scores.row(r);
      const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      if (best == static_cast<std::size_t>(labels[test[r]])) ++correct;
    }
    acc_total += static_cast<double>(correct) / static_cast<double>(test.size());
  }
  return acc_total / static_cast<double>(options.folds);
}

double acc_knn(const Matrix& z, std::span<const int> labels, std::size_t k, std::uint64_t seed,
               std::size_t folds) {
  validate_labels(z, labels, folds);
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "kNN classifier needs k >= 1");
  const std::size_t classes =
      static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  const std::vector<std::size_t> fold = stratified_folds(labels, folds, seed);

  double acc_total = 0.0;
  std::vector<std::pair<double, std::size_t>> cand;
  std::vector<std::size_t> votes(classes);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < z.rows(); ++i) (fold[i] == f ? test : train).push_back(i);
    if (test.empty() || train.size() < k) {
      throw Error(ErrorCode::DegenerateFold, "fold " + std::to_string(f) + " is degenerate");
    }
    std::size_t correct = 0;
    for (std::size_t t : test) {
      cand.clear();
      for (std::size_t i : train) cand.emplace_back(squared_distance(z.row(t), z.row(i)), i);
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
      std::fill(votes.begin(), votes.end(), 0);
      for (std::size_t r = 0; r < k; ++r) votes[static_cast<std::size_t>(labels[cand[r].second])]++;
      const std::size_t top = *std::max_element(votes.begin(), votes.end());
      // Ties go to the tied class whose member is nearest.
      int predicted = labels[cand[0].second];
      for (std::size_t r = 0; r < k; ++r) {
        const int l = labels[cand[r].second];
        if (votes[static_cast<std::size_t>(l)] == top) {
          predicted = l;
          break;
        }
      }
      if (predicted == labels[t]) ++correct;
    }
    acc_total += static_cast<double>(correct) / static_cast<double>(test.size());
  }
  return acc_total / static_cast<double>(folds);
}

}  // namespace invml
