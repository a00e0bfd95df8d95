#include "invml/interpolation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

#include "invml/error.hpp"
#include "invml/random.hpp"

namespace invml {
namespace {

std::vector<double> distances_from(const Matrix& points, std::size_t a) {
  std::vector<double> d(points.rows());
  for (std::size_t c = 0; c < points.rows(); ++c) d[c] = distance(points.row(a), points.row(c));
  return d;
}

std::size_t rank_in(const std::vector<double>& d, std::size_t a, std::size_t b) {
  std::size_t rank = 1;
  for (std::size_t c = 0; c < d.size(); ++c) {
    if (c == a || c == b) continue;
    if (d[c] < d[b] || (d[c] == d[b] && c < b)) ++rank;
  }
  return rank;
}

}  // namespace

std::vector<double> uniform_t_grid(std::size_t t_steps) {
  if (t_steps < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 interpolation steps");
  std::vector<double> t(t_steps);
  for (std::size_t s = 0; s < t_steps; ++s) {
    t[s] = static_cast<double>(s) / static_cast<double>(t_steps - 1);
  }
  return t;
}

std::vector<InterpolationResult> interpolate_pairs(
    const InvMLEncoder& enc, const Matrix& x,
    std::span<const std::pair<std::size_t, std::size_t>> pairs, std::size_t t_steps) {
  const std::vector<double> grid = uniform_t_grid(t_steps);
  std::vector<std::size_t> rows;
  for (const auto& [i, j] : pairs) {
    if (i >= x.rows() || j >= x.rows()) throw Error(ErrorCode::InvalidArgument, "pair index out of range");
    rows.push_back(i);
    rows.push_back(j);
  }
  std::ranges::sort(rows);
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  const Matrix z = encode_body(enc, select_rows(x, rows));
  const auto local = [&](std::size_t g) {
    return static_cast<std::size_t>(std::ranges::lower_bound(rows, g) - rows.begin());
  };

  const std::size_t m = x.cols();
  Matrix latent(pairs.size() * t_steps, m);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto zi = z.row(local(pairs[p].first));
    const auto zj = z.row(local(pairs[p].second));
    for (std::size_t s = 0; s < t_steps; ++s) {
      auto out = latent.row(p * t_steps + s);
      const double t = grid[s];
      for (std::size_t c = 0; c < m; ++c) out[c] = t * zi[c] + (1.0 - t) * zj[c];
    }
  }
  const Matrix recon = pairs.empty() ? Matrix() : inverse_body(enc, latent);

  std::vector<InterpolationResult> out;
  out.reserve(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    InterpolationResult r;
    r.i = pairs[p].first;
    r.j = pairs[p].second;
    r.t_grid = grid;
    r.latent_recons = Matrix(t_steps, m);
    r.input_interps = Matrix(t_steps, m);
    const auto xi = x.row(r.i);
    const auto xj = x.row(r.j);
    for (std::size_t s = 0; s < t_steps; ++s) {
      const auto rec = recon.row(p * t_steps + s);
      auto lr = r.latent_recons.row(s);
      auto in = r.input_interps.row(s);
      double se = 0.0;
      for (std::size_t c = 0; c < m; ++c) {
        lr[c] = rec[c];
        in[c] = grid[s] * xi[c] + (1.0 - grid[s]) * xj[c];
        se += (lr[c] - in[c]) * (lr[c] - in[c]);
      }
      r.mse_per_t.push_back(se / static_cast<double>(m));
    }
    out.push_back(std::move(r));
  }
  return out;
}

NeighborGraph latent_graph(const InvMLEncoder& enc, const Matrix& x, std::size_t k) {
  return knn_graph(encode_body(enc, x), k);
}

namespace {

std::vector<std::size_t> pick_anchors(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> perm = rng.permutation(n);
  if (count != 0 && count < n) perm.resize(count);
  return perm;
}

}  // namespace

std::vector<InterpolationResult> knn_interpolate(const InvMLEncoder& enc, const Matrix& x,
                                                 const NeighborGraph& graph,
                                                 const KnnInterpolationOptions& options) {
  if (graph.size() != x.rows()) throw Error(ErrorCode::ShapeMismatch, "graph does not match data");
  if (options.k == 0 || options.k > graph.k) {
    throw Error(ErrorCode::InvalidArgument, "k must lie in [1, graph k]");
  }
  Rng rng(options.seed);
  const auto anchors = pick_anchors(x.rows(), options.anchors, rng);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a : anchors) {
    for (std::size_t p = 0; p < options.pairs_per_sample; ++p) {
      pairs.emplace_back(a, graph.neighbor(a, rng.uniform_index(options.k)));
    }
  }
  return interpolate_pairs(enc, x, pairs, options.t_steps);
}

std::vector<double> interpolation_mse_curve(const InvMLEncoder& enc, const Matrix& x,
                                            const NeighborGraph& graph, std::size_t k_max,
                                            const KnnInterpolationOptions& options) {
  if (k_max == 0 || k_max > graph.k) {
    throw Error(ErrorCode::InvalidArgument, "k range must lie within the graph's k");
  }
  std::vector<double> curve;
  for (std::size_t k = 1; k <= k_max; ++k) {
    KnnInterpolationOptions o = options;
    o.k = k;
    const auto results = knn_interpolate(enc, x, graph, o);
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& r : results) {
      for (double v : r.mse_per_t) total += v;
      count += r.mse_per_t.size();
    }
    curve.push_back(count ? total / static_cast<double>(count) : 0.0);
  }
  return curve;
}

std::vector<std::size_t> shortest_path(const Matrix& points, const NeighborGraph& graph,
                                       std::size_t from, std::size_t to) {
  const std::size_t n = graph.size();
  if (points.rows() != n) throw Error(ErrorCode::ShapeMismatch, "graph does not match points");
  if (from >= n || to >= n) throw Error(ErrorCode::InvalidArgument, "endpoint out of range");
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < graph.k; ++r) {
      const std::size_t j = graph.neighbor(i, r);
      const double w = distance(points.row(i), points.row(j));
      adj[i].emplace_back(j, w);
      adj[j].emplace_back(i, w);
    }
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, kInf);
  std::vector<std::size_t> prev(n, n);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[from] = 0.0;
  queue.emplace(0.0, from);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u]) continue;
    if (u == to) break;
    for (const auto& [v, w] : adj[u]) {
      const double nd = d + w;
      if (nd < dist[v] || (nd == dist[v] && u < prev[v])) {
        dist[v] = nd;
        prev[v] = u;
        queue.emplace(nd, v);
      }
    }
  }
  if (dist[to] == kInf) {
    throw Error(ErrorCode::DisconnectedPair,
                "no latent-graph path from " + std::to_string(from) + " to " + std::to_string(to));
  }
  std::vector<std::size_t> path;
  for (std::size_t v = to; v != n; v = prev[v]) {
    path.push_back(v);
    if (v == from) break;
  }
  std::ranges::reverse(path);
  return path;
}

std::size_t neighbor_rank(const Matrix& points, std::size_t a, std::size_t b) {
  if (a >= points.rows() || b >= points.rows() || a == b) {
    throw Error(ErrorCode::InvalidArgument, "rank needs two distinct valid rows");
  }
  return rank_in(distances_from(points, a), a, b);
}

GeodesicResult geodesic_interpolate(const InvMLEncoder& enc, const Matrix& x,
                                    const NeighborGraph& latent, std::size_t i, std::size_t j,
                                    const GeodesicOptions& options) {
  if (options.segments == 0) throw Error(ErrorCode::InvalidArgument, "segments must be >= 1");
  const Matrix z = encode_body(enc, x);
  if (neighbor_rank(z, i, j) < options.min_pair_rank ||
      neighbor_rank(z, j, i) < options.min_pair_rank) {
    throw Error(ErrorCode::InvalidArgument, "pair is not distant enough for geodesic interpolation");
  }
  GeodesicResult result;
  result.path = shortest_path(z, latent, i, j);
  const std::vector<std::size_t>& path = result.path;
  const std::size_t hops = path.size() - 1;
  const std::size_t want = std::min(options.segments, hops);

  // admissible[a][b] for path positions a < b; hop cost = latent distance.
  const std::size_t P = path.size();
  std::vector<std::vector<double>> cost(P, std::vector<double>(P, -1.0));
  for (std::size_t a = 0; a + 1 < P; ++a) {
    const auto d = distances_from(z, path[a]);
    for (std::size_t b = a + 1; b < P; ++b) {
      if (rank_in(d, path[a], path[b]) <= options.max_hop_rank) cost[a][b] = d[path[b]];
    }
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // best[s][b]: minimal longest hop reaching position b in s hops.
  std::vector<std::vector<double>> best(want + 1, std::vector<double>(P, kInf));
  std::vector<std::vector<std::size_t>> from(want + 1, std::vector<std::size_t>(P, P));
  best[0][0] = 0.0;
  for (std::size_t s = 1; s <= want; ++s) {
    for (std::size_t b = 1; b < P; ++b) {
      for (std::size_t a = 0; a < b; ++a) {
        if (best[s - 1][a] == kInf || cost[a][b] < 0.0) continue;
        const double v = std::max(best[s - 1][a], cost[a][b]);
        if (v < best[s][b]) {
          best[s][b] = v;
          from[s][b] = a;
        }
      }
    }
  }
  if (best[want][P - 1] == kInf) {
    throw Error(ErrorCode::NoValidWaypoints,
                "no " + std::to_string(want) + "-hop waypoint sequence within rank " +
                    std::to_string(options.max_hop_rank));
  }
  std::vector<std::size_t> positions{P - 1};
  for (std::size_t s = want, b = P - 1; s > 0; --s) {
    b = from[s][b];
    positions.push_back(b);
  }
  std::ranges::reverse(positions);
  for (std::size_t p : positions) result.waypoints.push_back(path[p]);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t s = 0; s + 1 < result.waypoints.size(); ++s) {
    pairs.emplace_back(result.waypoints[s + 1], result.waypoints[s]);
  }
  result.segments = interpolate_pairs(enc, x, pairs, options.t_steps);
  return result;
}

std::optional<std::pair<std::size_t, std::size_t>> find_distant_pair(
    const Matrix& latent_points, std::size_t min_rank, std::uint64_t seed,
    const std::optional<std::vector<int>>& labels, std::size_t attempts) {
  const std::size_t n = latent_points.rows();
  if (n < 2) return std::nullopt;
  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::vector<double> d(n);
  for (std::size_t a = 0; a < attempts; ++a) {
    const std::size_t i = rng.uniform_index(n);
    const auto xi = latent_points.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      const auto xj = latent_points.row(j);
      for (std::size_t c = 0; c < xi.size(); ++c) s += (xi[c] - xj[c]) * (xi[c] - xj[c]);
      d[j] = s;
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t u, std::size_t v) { return d[u] < d[v]; });
    // order[0] is i itself (or a duplicate ahead of it); ranks count the others.
    std::size_t rank = 0;
    for (std::size_t j : order) {
      if (j == i) continue;
      ++rank;
      if (rank < min_rank) continue;
      if (labels && (*labels)[i] == (*labels)[j]) continue;
      if (neighbor_rank(latent_points, j, i) >= min_rank) return std::make_pair(i, j);
    }
  }
  return std::nullopt;
}

}  // namespace invml
