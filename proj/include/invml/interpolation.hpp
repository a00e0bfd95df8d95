#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "invml/datasets.hpp"
#include "invml/matrix.hpp"
#include "invml/model.hpp"

namespace invml {

/// One interpolated pair. Row r of both matrices corresponds to t_grid[r];
/// t = 1 is x_i and t = 0 is x_j.
struct InterpolationResult {
  std::size_t i = 0;
  std::size_t j = 0;
  std::vector<double> t_grid;
  Matrix latent_recons;  // inverse_body(t z_i + (1 - t) z_j)
  Matrix input_interps;  // t x_i + (1 - t) x_j
  std::vector<double> mse_per_t;
};

/// t_steps points from 0 to 1 inclusive.
std::vector<double> uniform_t_grid(std::size_t t_steps);

/// Interpolates each pair in body-output space and maps back exactly.
std::vector<InterpolationResult> interpolate_pairs(
    const InvMLEncoder& enc, const Matrix& x,
    std::span<const std::pair<std::size_t, std::size_t>> pairs, std::size_t t_steps);

/// k-NN graph of the body outputs (the latent space used for pair selection).
NeighborGraph latent_graph(const InvMLEncoder& enc, const Matrix& x, std::size_t k);

struct KnnInterpolationOptions {
  std::size_t k = 10;
  /// Anchors drawn without replacement; 0 uses every sample.
  std::size_t anchors = 200;
  std::size_t pairs_per_sample = 1;
  std::size_t t_steps = 13;
  std::uint64_t seed = 0;
};

/// Pairs (i, j) with j drawn uniformly from the first k neighbours of i in `graph`.
std::vector<InterpolationResult> knn_interpolate(const InvMLEncoder& enc, const Matrix& x,
                                                 const NeighborGraph& graph,
                                                 const KnnInterpolationOptions& options);

/// Mean of mse_per_t over pairs and t, for k = 1..k_max (index k - 1). The
/// same anchors are used for every k.
std::vector<double> interpolation_mse_curve(const InvMLEncoder& enc, const Matrix& x,
                                            const NeighborGraph& graph, std::size_t k_max,
                                            const KnnInterpolationOptions& options);

/// Dijkstra over the symmetrised graph with Euclidean edge weights on `points`.
/// Throws DisconnectedPair when `to` is unreachable.
std::vector<std::size_t> shortest_path(const Matrix& points, const NeighborGraph& graph,
                                       std::size_t from, std::size_t to);

/// 1-based closeness rank of `b` among all other points as seen from `a`
/// (ties broken by lower index).
std::size_t neighbor_rank(const Matrix& points, std::size_t a, std::size_t b);

struct GeodesicOptions {
  std::size_t segments = 4;
  std::size_t t_steps = 13;
  /// Both endpoints must rank at least this far in each other's ordering.
  std::size_t min_pair_rank = 45;
  /// Each waypoint must rank at most this close to its predecessor.
  std::size_t max_hop_rank = 20;
};

struct GeodesicResult {
  std::vector<std::size_t> path;       // full shortest path
  std::vector<std::size_t> waypoints;  // endpoints included
  std::vector<InterpolationResult> segments;
};

/// Piecewise latent interpolation along the latent-graph shortest path.
///
/// Waypoints are a subsequence of the path with exactly min(segments, hops)
/// hops, each within max_hop_rank; among admissible choices the longest hop
/// is minimised. Throws NoValidWaypoints if no such subsequence exists and
/// InvalidArgument if the pair is not distant enough.
GeodesicResult geodesic_interpolate(const InvMLEncoder& enc, const Matrix& x,
                                    const NeighborGraph& latent, std::size_t i, std::size_t j,
                                    const GeodesicOptions& options);

/// Seeded search for a distant pair: for a random anchor i, the closest j
/// that ranks at least `min_rank` from i and vice versa (and lies in a
/// different class when labels are given).
std::optional<std::pair<std::size_t, std::size_t>> find_distant_pair(
    const Matrix& latent_points, std::size_t min_rank, std::uint64_t seed,
    const std::optional<std::vector<int>>& labels = std::nullopt, std::size_t attempts = 1000);

}  // namespace invml
