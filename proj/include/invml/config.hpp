#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "invml/losses.hpp"
#include "invml/trainer.hpp"

namespace invml {

struct DatasetSpec {
  /// swissroll | spheres | halfspheres | idx | csv
  std::string kind = "swissroll";
  std::size_t n = 800;
  /// Held-out samples for evaluation (generated with a different seed, or
  /// split off a loaded file). 0 evaluates on the training set.
  std::size_t test_n = 0;
  std::size_t ambient_dim = 101;
  /// Sphere dimension d (S^d); 0 means ambient_dim - 1.
  std::size_t intrinsic_dim = 0;
  std::string images;
  std::string labels;
  bool downsample16 = false;
  std::string csv;
  bool csv_labels = true;
  /// Per-feature zero mean / unit variance using training statistics.
  bool standardize = false;
  std::uint64_t seed = 0;
};

struct ModelSpec {
  std::size_t layers = 8;
  std::size_t target_dim = 2;
  double leaky_alpha = 0.1;
  /// random | identity
  std::string init = "random";
};

struct MetricsSpec {
  std::size_t k1 = 5;
  std::size_t k2 = 10;
  double rank_tol = 1e-3;
  /// Neighbourhood size for Kmin/Kmax.
  std::size_t lipschitz_k = 5;
  std::size_t lmse_rows = 2000;
  bool accuracy = true;
};

struct InterpolationSpec {
  /// knn | geodesic
  std::string mode = "knn";
  std::size_t k_max = 10;
  std::size_t t_steps = 13;
  std::size_t anchors = 200;
  std::size_t segments = 4;
  std::size_t min_pair_rank = 45;
  std::size_t max_hop_rank = 20;
  /// Geodesic pair; both -1 (default) picks one with find_distant_pair.
  long long pair_i = -1;
  long long pair_j = -1;
  /// Sparsity for compressed-sensing head inversion in `reconstruct`; 0 uses least squares.
  std::size_t sparsity = 0;
};

struct OutputSpec {
  std::string dir = "out";
  bool plots = true;
};

struct ExperimentConfig {
  std::string profile = "swissroll";
  DatasetSpec dataset;
  ModelSpec model;
  /// [schedule] fills trainer.schedule and trainer.loss; [trainer] the rest.
  TrainConfig trainer;
  MetricsSpec metrics;
  InterpolationSpec interpolation;
  OutputSpec output;
};

const std::vector<std::string>& profile_names();

/// Defaults for a named dataset profile. Throws ConfigError.
ExperimentConfig profile_config(std::string_view profile);

/// Overlays the INI file at `path` onto `base`. Unknown sections/keys and
/// malformed values raise ConfigError naming the field.
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base);
ExperimentConfig parse_config(const std::string& ini_text, ExperimentConfig base);

/// Divides epochs and sample counts by 5 (at least 1 epoch, 50 samples).
void apply_quick(ExperimentConfig& config);

/// Field-level checks; throws ConfigError("[section] key: reason").
void validate(const ExperimentConfig& config);

/// Resolved configuration in the same INI format; parse_config(to_ini(c))
/// reproduces c.
std::string to_ini(const ExperimentConfig& config);

}  // namespace invml
