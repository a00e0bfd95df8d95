#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "invml/datasets.hpp"
#include "invml/matrix.hpp"

namespace invml {

/// Evaluation quantities for one representation layer.
///
/// CSV column order (see csv_header): layer, rmse, mne, trust, cont, k_min,
/// k_max, l_mse, acc_logistic, acc_knn, rank, k1, k2. Missing optionals are
/// written as empty fields.
struct MetricsReport {
  std::string layer;
  std::optional<double> rmse;
  std::optional<double> mne;
  double trust = 0.0;
  double cont = 0.0;
  double k_min = 1.0;
  double k_max = 1.0;
  double l_mse = 0.0;
  std::optional<double> acc_logistic;
  std::optional<double> acc_knn;
  std::optional<std::size_t> rank_sparsity;
  std::size_t k1 = 5;
  std::size_t k2 = 10;
  std::size_t skipped_pairs = 0;
};

std::string csv_header();
std::string to_csv_row(const MetricsReport& report);

/// (sum_i ||x_i - x_hat_i||^2 / N^2)^(1/2), with the 1/N^2 normalisation.
double rmse(const Matrix& x, const Matrix& x_hat);

struct LayerRoundTrip {
  Matrix input;
  Matrix reconstruction;
};

/// Largest entrywise error over all layer round trips.
double mne(std::span<const LayerRoundTrip> layers);

struct NeighborhoodScores {
  double trust = 0.0;
  double cont = 0.0;
};

/// Trustworthiness and continuity averaged over k in [k1, k2].
///
/// Trust penalises embedding neighbours that are not input neighbours by
/// their input-space rank; continuity swaps the roles. Ranks are 1-based
/// over the other points, ties broken by lower index.
NeighborhoodScores trust_and_continuity(const Matrix& x, const Matrix& z, std::size_t k1,
                                        std::size_t k2);
double trustworthiness(const Matrix& x, const Matrix& z, std::size_t k1, std::size_t k2);
double continuity(const Matrix& x, const Matrix& z, std::size_t k1, std::size_t k2);

struct BiLipschitz {
  double k_min = 1.0;
  double k_max = 1.0;
  /// Pairs skipped because a distance was zero in either space.
  std::size_t skipped_pairs = 0;
};

/// K_ij = max(d_z/d_x, d_x/d_z) over graph neighbours; min_i max_j and max_i max_j.
BiLipschitz bi_lipschitz(const Matrix& x, const Matrix& z, const NeighborGraph& graph);

/// (sum_ij |d_X(i,j) - d_Z(i,j)| / N^2)^(1/2); rows are subsampled (seeded)
/// to `max_rows` when N is larger.
double latent_mse(const Matrix& x, const Matrix& z, std::uint64_t seed = 0,
                  std::size_t max_rows = 2000);

struct LogisticOptions {
  std::size_t folds = 10;
  std::size_t iterations = 500;
  double l2 = 1e-4;
  double learning_rate = 0.5;
};

/// Stratified fold assignment used by both classifiers.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds,
                                          std::uint64_t seed);

/// Mean test accuracy of softmax regression under stratified k-fold CV.
double acc_logistic_10fold(const Matrix& z, std::span<const int> labels, std::uint64_t seed,
                           const LogisticOptions& options = {});

/// Mean test accuracy of a majority-vote kNN classifier under 10-fold CV.
double acc_knn(const Matrix& z, std::span<const int> labels, std::size_t k, std::uint64_t seed,
               std::size_t folds = 10);

}  // namespace invml
