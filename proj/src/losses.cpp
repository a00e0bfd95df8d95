#include "invml/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "invml/error.hpp"

namespace invml {
namespace {

constexpr std::size_t kPushBlockRows = 256;

double ramp(double epoch, double begin, double end, double from, double to) {
  if (epoch <= begin) return from;
  if (epoch >= end) return to;
  return from + (to - from) * (epoch - begin) / (end - begin);
}

double linear_in_layer(std::size_t l, std::size_t first, std::size_t last, double at_first,
                       double at_last) {
  if (last <= first) return at_last;
  const double f = static_cast<double>(l - first) / static_cast<double>(last - first);
  return at_first + (at_last - at_first) * f;
}

}  // namespace

std::vector<std::size_t> layer_target_dims(std::size_t m, std::size_t target_dim,
                                           std::size_t layers) {
  if (layers < 3) throw Error(ErrorCode::InvalidArgument, "need at least 3 layers");
  if (target_dim == 0 || target_dim > m) {
    throw Error(ErrorCode::InvalidArgument, "target dimension must lie in [1, m]");
  }
  std::vector<std::size_t> dims(layers, 0);
  const double ratio = static_cast<double>(target_dim) / static_cast<double>(m);
  std::size_t prev = m;
  for (std::size_t l = 2; l + 1 <= layers; ++l) {
    const double e = static_cast<double>(l - 1) / static_cast<double>(layers - 2);
    auto s = static_cast<std::size_t>(std::llround(static_cast<double>(m) * std::pow(ratio, e)));
    s = std::clamp(s, target_dim, prev);
    dims[l] = s;
    prev = s;
  }
  return dims;
}

ScheduleSet eval_schedules(std::size_t epoch, const ScheduleConfig& c, double push_radius) {
  if (c.epochs_total == 0) throw Error(ErrorCode::InvalidArgument, "epochs_total must be >= 1");
  if (epoch > c.epochs_total) throw Error(ErrorCode::InvalidArgument, "epoch beyond schedule");
  const std::size_t L = c.layers;
  ScheduleSet s;
  s.epoch = epoch;
  s.epochs_total = c.epochs_total;
  s.target_dims = layer_target_dims(c.input_dim, c.target_dim, L);
  s.alpha.assign(L + 1, 0.0);
  s.beta.assign(L + 1, 0.0);
  s.gamma.assign(L + 1, 0.0);
  s.mu.assign(L + 1, 0.0);
  s.push_radius = c.push_radius > 0.0 ? c.push_radius : push_radius;

  const double T = static_cast<double>(c.epochs_total);
  const double e = static_cast<double>(epoch);
  const double alpha = ramp(e, c.alpha_ramp_begin * T, c.alpha_ramp_end * T, 0.0, c.alpha0);
  const double gamma = ramp(e, c.gamma_decay_begin * T, c.gamma_decay_end * T, c.gamma0, 0.0);
  for (std::size_t l = 1; l <= L; ++l) s.alpha[l] = c.use_orth ? alpha : 0.0;
  for (std::size_t l = 2; l + 1 <= L; ++l) {
    s.beta[l] = c.use_pad ? linear_in_layer(l, 2, L - 1, c.beta_min, c.beta_max) : 0.0;
    s.gamma[l] = c.use_extra ? gamma : 0.0;
  }
  for (std::size_t l = 2; l <= L; ++l) s.mu[l] = linear_in_layer(l, 2, L, c.mu_max, c.mu_min);
  return s;
}

LocalNeighborhood LocalNeighborhood::from_graph(const NeighborGraph& graph) {
  LocalNeighborhood h;
  h.n = graph.size();
  h.pairs = graph.pairs();
  h.input_distances.reserve(h.pairs.size());
  h.neighbors.resize(h.n);
  for (std::size_t i = 0; i < h.n; ++i) {
    for (std::size_t r = 0; r < graph.k; ++r) {
      h.input_distances.push_back(graph.distance(i, r));
      h.neighbors[i].push_back(graph.neighbor(i, r));
    }
  }
  return h;
}

LocalNeighborhood LocalNeighborhood::for_block(const NeighborGraph& graph,
                                               std::span<const std::size_t> anchors,
                                               std::vector<std::size_t>& members) {
  members.assign(anchors.begin(), anchors.end());
  std::unordered_map<std::size_t, std::size_t> local;
  for (std::size_t a = 0; a < anchors.size(); ++a) local.emplace(anchors[a], a);
  for (std::size_t a : anchors) {
    for (std::size_t r = 0; r < graph.k; ++r) {
      const std::size_t j = graph.neighbor(a, r);
      if (local.emplace(j, members.size()).second) members.push_back(j);
    }
  }
  LocalNeighborhood h;
  h.n = members.size();
  h.neighbors.resize(h.n);
  for (std::size_t li = 0; li < h.n; ++li) {
    const std::size_t gi = members[li];
    for (std::size_t r = 0; r < graph.k; ++r) {
      const auto it = local.find(graph.neighbor(gi, r));
      if (it == local.end()) continue;
      h.neighbors[li].push_back(it->second);
      if (li < anchors.size()) {
        h.pairs.emplace_back(li, it->second);
        h.input_distances.push_back(graph.distance(gi, r));
      }
    }
  }
  return h;
}

Var row_orthogonality(Var head, std::size_t power_iters) {
  Graph& g = *head.graph();
  const std::size_t rows = head.value().rows();
  Var gram = ag::matmul_nt(head, head);
  return ag::spectral_norm(ag::sub(gram, g.constant(Matrix::identity(rows))), power_iters);
}

Var loss_orth(std::span<const Var> weights, std::span<const double> alphas,
              std::size_t power_iters) {
  if (weights.empty() || weights.size() != alphas.size()) {
    throw Error(ErrorCode::InvalidArgument, "loss_orth needs one weight per matrix");
  }
  Graph& g = *weights.front().graph();
  std::vector<Var> terms;
  std::vector<double> w;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    // Copied: recording new nodes may move earlier values.
    const std::size_t n = weights[l].value().cols();
    if (!weights[l].value().is_square()) {
      throw Error(ErrorCode::ShapeMismatch, "loss_orth needs square weights");
    }
    if (alphas[l] == 0.0) continue;
    Var gram = ag::matmul_tn(weights[l], weights[l]);
    Var dev = ag::sub(gram, g.constant(Matrix::identity(n)));
    terms.push_back(ag::spectral_norm(dev, power_iters));
    w.push_back(alphas[l]);
  }
  if (terms.empty()) return g.constant(Matrix(1, 1));
  return ag::weighted_sum(terms, w);
}

Var loss_pad(std::span<const Var> outputs, std::span<const std::size_t> target_dims,
             std::span<const double> betas) {
  if (outputs.size() != target_dims.size() || outputs.size() != betas.size()) {
    throw Error(ErrorCode::InvalidArgument, "loss_pad needs matching layer lists");
  }
  if (outputs.empty()) throw Error(ErrorCode::InvalidArgument, "loss_pad needs at least one layer");
  Graph& g = *outputs.front().graph();
  std::vector<Var> terms;
  std::vector<double> w;
  for (std::size_t l = 0; l < outputs.size(); ++l) {
    const std::size_t m = outputs[l].value().cols();
    if (betas[l] == 0.0 || target_dims[l] >= m) continue;
    terms.push_back(ag::sum(ag::abs(ag::slice_cols(outputs[l], target_dims[l], m))));
    w.push_back(betas[l]);
  }
  if (terms.empty()) return g.constant(Matrix(1, 1));
  return ag::weighted_sum(terms, w);
}

Var loss_lis(Var z, const LocalNeighborhood& hood, bool squared) {
  Graph& g = *z.graph();
  if (z.value().rows() != hood.n) {
    throw Error(ErrorCode::ShapeMismatch, "LIS: batch rows differ from neighbourhood size");
  }
  if (hood.pairs.empty()) return g.constant(Matrix(1, 1));
  Var dz = ag::pair_distances(z, hood.pairs);
  Var dx = g.constant(Matrix::column(hood.input_distances));
  Var diff = ag::sub(dz, dx);
  return ag::sum(squared ? ag::square(diff) : ag::abs(diff));
}

Var loss_lis(const Matrix& x, Var z, const NeighborGraph& graph, bool squared) {
  if (x.rows() != z.value().rows() || graph.size() != x.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "LIS: x, z and graph must have equal row counts");
  }
  return loss_lis(z, LocalNeighborhood::from_graph(graph), squared);
}

Var loss_push(Var z, const LocalNeighborhood& hood, double radius, bool literal) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "push radius must be > 0");
  const Matrix& zv = z.value();
  const std::size_t n = zv.rows();
  const std::size_t m = zv.cols();
  if (n != hood.n) {
    throw Error(ErrorCode::ShapeMismatch, "push: batch rows differ from neighbourhood size");
  }
  const double r2 = radius * radius;

  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (double v : zv.row(i)) sq[i] += v * v;
  }

  // Value and gradient are accumulated together, a row block at a time.
  // For an ordered pair (i, j) with coefficient a = -1 / ((1 + d) d):
  //   grad_i += a (z_i - z_j),  grad_j -= a (z_i - z_j).
  Matrix grad(n, m);
  double value = 0.0;
  std::vector<std::size_t> stamp(n, 0);
  for (std::size_t r0 = 0; r0 < n; r0 += kPushBlockRows) {
    const std::size_t r1 = std::min(n, r0 + kPushBlockRows);
    std::vector<std::size_t> rows(r1 - r0);
    for (std::size_t i = r0; i < r1; ++i) rows[i - r0] = i;
    const Matrix zb = select_rows(zv, rows);
    const Matrix gram = matmul_nt(zb, zv);
    Matrix coef(r1 - r0, n);
    std::vector<double> row_sum(r1 - r0, 0.0);
    std::vector<double> col_sum(n, 0.0);
    bool any = false;
    for (std::size_t i = r0; i < r1; ++i) {
      for (std::size_t j : hood.neighbors[i]) stamp[j] = i + 1;
      const auto g = gram.row(i - r0);
      auto c = coef.row(i - r0);
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const bool neighbor = stamp[j] == i + 1;
        if (neighbor != literal) continue;
        const double d2 = sq[i] + sq[j] - 2.0 * g[j];
        if (d2 >= r2) continue;
        const double d = std::sqrt(std::max(d2, 0.0));
        value -= std::log1p(d);
        if (d == 0.0) continue;
        const double a = -1.0 / ((1.0 + d) * d);
        c[j] = a;
        row_sum[i - r0] += a;
        col_sum[j] += a;
        any = true;
      }
    }
    if (!any) continue;
    const Matrix az = matmul(coef, zv);     // sum_j a_ij z_j for block rows
    const Matrix atz = matmul_tn(coef, zb); // sum_i a_ij z_i for every j
    for (std::size_t i = r0; i < r1; ++i) {
      auto gi = grad.row(i);
      const auto zi = zv.row(i);
      for (std::size_t k = 0; k < m; ++k) gi[k] += row_sum[i - r0] * zi[k] - az(i - r0, k);
    }
    for (std::size_t j = 0; j < n; ++j) {
      auto gj = grad.row(j);
      const auto zj = zv.row(j);
      for (std::size_t k = 0; k < m; ++k) gj[k] += col_sum[j] * zj[k] - atz(j, k);
    }
  }
  return z.graph()->record(Matrix(1, 1, value), {z},
                           [grad = std::move(grad)](BackwardContext& c) {
                             c.input_grad(0) += grad * c.grad_out()(0, 0);
                           });
}

Var loss_push(Var z, const NeighborGraph& graph, double radius, bool literal) {
  return loss_push(z, LocalNeighborhood::from_graph(graph), radius, literal);
}

double geometric_scale(const LocalNeighborhood& hood, const LossOptions& options) {
  if (!options.mean_reduction || hood.pairs.empty()) return 1.0;
  return 1.0 / static_cast<double>(hood.pairs.size());
}

Var loss_extra(Graph& graph, std::span<const Var> head_outputs, const LocalNeighborhood& hood,
               std::span<const double> gammas, std::span<const double> mus, double radius,
               const LossOptions& options) {
  if (head_outputs.size() != gammas.size() || head_outputs.size() != mus.size()) {
    throw Error(ErrorCode::InvalidArgument, "loss_extra needs one gamma and mu per head");
  }
  const double scale = geometric_scale(hood, options);
  std::vector<Var> terms;
  std::vector<double> w;
  for (std::size_t l = 0; l < head_outputs.size(); ++l) {
    if (gammas[l] == 0.0) continue;
    terms.push_back(loss_lis(head_outputs[l], hood, options.lis_squared));
    w.push_back(gammas[l] * scale);
    if (mus[l] != 0.0) {
      terms.push_back(loss_push(head_outputs[l], hood, radius, options.push_literal));
      w.push_back(gammas[l] * mus[l] * scale);
    }
  }
  if (terms.empty()) return graph.constant(Matrix(1, 1));
  return ag::weighted_sum(terms, w);
}

}  // namespace invml
