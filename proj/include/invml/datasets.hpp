#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "invml/matrix.hpp"

namespace invml {

struct Dataset {
  Matrix x;                               // n x m samples
  std::optional<std::vector<int>> labels; // length n, values in [0, class_count)
  std::string name;
  std::size_t image_width = 0;            // nonzero when rows are images
  std::size_t image_height = 0;

  std::size_t size() const noexcept { return x.rows(); }
  std::size_t dim() const noexcept { return x.cols(); }
  std::size_t class_count() const;
  void validate() const;
};

/// Exact k-nearest neighbours in input space.
struct NeighborGraph {
  std::size_t k = 0;
  std::vector<std::size_t> indices;  // n x k, row-major
  Matrix distances;                  // n x k, each row ascending

  std::size_t size() const noexcept { return distances.rows(); }
  std::size_t neighbor(std::size_t i, std::size_t r) const { return indices[i * k + r]; }
  double distance(std::size_t i, std::size_t r) const { return distances(i, r); }
  double mean_distance() const;
  /// Ordered pairs (i, j) for j in the first `k_used` neighbours of i.
  std::vector<std::pair<std::size_t, std::size_t>> pairs(std::size_t k_used = 0) const;
};

struct DatasetStats {
  double entropy_mean = 0.0;   // bits
  double hist_std_mean = 0.0;
  std::optional<double> knn_acc;
  std::optional<double> logistic_acc;
};

/// (t cos t, y, t sin t) with t ~ U[1.5 pi, 4.5 pi], y ~ U[0, 21].
Dataset gen_swiss_roll(std::size_t n, std::uint64_t seed);

struct SpheresOptions {
  std::size_t n = 5500;
  std::size_t ambient_dim = 101;
  /// Dimension of each sphere; 0 means ambient_dim - 1 (spheres fill the space).
  std::size_t intrinsic_dim = 0;
  bool half = false;
  std::size_t sphere_count = 10;
  double outer_radius = 5.0;
};

/// Ten unit spheres around Gaussian-shifted centres plus one enclosing sphere
/// of radius 5 about the origin. Labels are the sphere index (10 = enclosing).
Dataset gen_spheres(const SpheresOptions& options, std::uint64_t seed);
Dataset gen_spheres(std::size_t n, std::size_t ambient_dim, std::uint64_t seed, bool half);

/// Per-sphere centres used by gen_spheres for the same seed and options.
Matrix sphere_centers(const SpheresOptions& options, std::uint64_t seed);

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Loads an IDX image file (and optional label file); pixels scaled to [0, 1].
/// With `downsample16`, images are area-resampled to 16 x 16.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::optional<std::filesystem::path>& labels_path,
                 bool downsample16 = false);

void write_idx_images(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

/// One sample per row; an optional last column holds integer labels.
/// A first line that does not parse as numbers is treated as a header.
Dataset load_csv(const std::filesystem::path& path, bool last_column_is_label);
void save_csv(const std::filesystem::path& path, const Dataset& ds);

/// Area-averaging resample of a single row-major grayscale image.
std::vector<double> resample_image(std::span<const double> pixels, std::size_t width,
                                   std::size_t height, std::size_t out_width,
                                   std::size_t out_height);

Dataset subset(const Dataset& ds, std::span<const std::size_t> rows);
/// Seeded split; the first `n_train` shuffled rows become the training set.
std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, std::size_t n_train,
                                             std::uint64_t seed);

/// Brute-force Euclidean k-NN, ties broken by lower index. Throws KTooLarge if k >= n.
NeighborGraph knn_graph(const Matrix& x, std::size_t k);

/// Histogram entropy/std per image, plus 10-fold kNN (k=5) and logistic accuracy.
DatasetStats dataset_stats(const Dataset& ds, std::size_t bins, std::uint64_t seed,
                           bool with_accuracy = true);

double histogram_entropy_bits(std::span<const double> pixels, std::size_t bins);
double histogram_std(std::span<const double> pixels, std::size_t bins);

}  // namespace invml
