#include "invml/model.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include "invml/error.hpp"
#include "invml/linalg.hpp"
#include "invml/random.hpp"

namespace invml {
namespace {

Matrix leading_rows(const Matrix& q, std::size_t rows) {
  Matrix out(rows, q.cols());
  for (std::size_t r = 0; r < rows; ++r) std::ranges::copy(q.row(r), out.row(r).begin());
  return out;
}

Matrix selector(std::size_t rows, std::size_t cols) {
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) out(r, r) = 1.0;
  return out;
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Matrix checked_inverse(const Matrix& w, std::size_t layer) {
  const double cond = condition_number_1(w);
  if (cond > kInverseErrorCondition) {
    throw Error(ErrorCode::IllConditioned,
                "layer " + std::to_string(layer) + " condition " + std::to_string(cond));
  }
  if (cond > kInverseWarnCondition) {
    std::clog << "warning: layer " << layer << " is ill-conditioned (condition " << cond
              << "); inverse may be inaccurate\n";
  }
  return mat_inverse(w, kInverseErrorCondition);
}

}  // namespace

InvMLEncoder::InvMLEncoder(std::size_t input_dim, std::size_t target_dim, std::size_t layers,
                           ActivationSpec activation)
    : input_dim_(input_dim), target_dim_(target_dim), layers_(layers), activation_(activation) {
  if (input_dim == 0) throw Error(ErrorCode::InvalidArgument, "input dimension must be >= 1");
  if (!(activation.alpha > 0.0 && activation.alpha < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "LeakyReLU alpha must lie in (0, 1)");
  }
  extra_dims_ = layer_target_dims(input_dim, target_dim, layers);
  body_.assign(layers - 1, Matrix::identity(input_dim));
  head_ = selector(target_dim, input_dim);
  for (std::size_t l = 2; l + 1 <= layers; ++l) {
    extra_heads_.push_back(selector(extra_dims_[l], input_dim));
  }
}

InvMLEncoder InvMLEncoder::initialized(std::size_t input_dim, std::size_t target_dim,
                                       std::size_t layers, std::uint64_t seed,
                                       ActivationSpec activation) {
  InvMLEncoder enc(input_dim, target_dim, layers, activation);
  Rng rng(seed);
  const auto orthogonal = [&] { return qr_orthogonalize(rng.gaussian(input_dim, input_dim)); };
  for (auto& w : enc.body_) w = orthogonal();
  enc.head_ = leading_rows(orthogonal(), target_dim);
  for (auto& h : enc.extra_heads_) h = leading_rows(orthogonal(), h.rows());
  return enc;
}

InvMLEncoder InvMLEncoder::identity(std::size_t input_dim, std::size_t target_dim,
                                    std::size_t layers, ActivationSpec activation) {
  return InvMLEncoder(input_dim, target_dim, layers, activation);
}

void InvMLEncoder::validate() const {
  if (body_.size() + 1 != layers_) throw Error(ErrorCode::ShapeMismatch, "body must hold L-1 layers");
  for (const auto& w : body_) {
    if (w.rows() != input_dim_ || w.cols() != input_dim_) {
      throw Error(ErrorCode::ShapeMismatch, "body weights must be m x m");
    }
  }
  if (head_.rows() != target_dim_ || head_.cols() != input_dim_) {
    throw Error(ErrorCode::ShapeMismatch, "head must be s' x m");
  }
  if (extra_heads_.size() + 2 != layers_) {
    throw Error(ErrorCode::ShapeMismatch, "need one extra head per layer 2..L-1");
  }
  for (std::size_t l = 2; l + 1 <= layers_; ++l) {
    const Matrix& h = extra_heads_[l - 2];
    if (h.rows() != extra_dims_[l] || h.cols() != input_dim_) {
      throw Error(ErrorCode::ShapeMismatch, "extra head " + std::to_string(l) + " has wrong shape");
    }
  }
}

ForwardTrace forward(const InvMLEncoder& enc, const Matrix& x, bool with_extra_heads) {
  if (x.cols() != enc.input_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "input has " + std::to_string(x.cols()) +
                                              " columns, encoder expects " +
                                              std::to_string(enc.input_dim()));
  }
  ForwardTrace t;
  t.activations.reserve(enc.body_layers() + 1);
  t.activations.push_back(x);
  for (const auto& w : enc.body()) {
    t.activations.push_back(leaky_relu_forward(matmul_nt(t.activations.back(), w),
                                               enc.activation().alpha));
  }
  t.embedding = matmul_nt(t.body_output(), enc.head());
  if (with_extra_heads) {
    for (std::size_t l = 2; l + 1 <= enc.layer_count(); ++l) {
      t.head_outputs.push_back(matmul_nt(t.activations[l], enc.extra_heads()[l - 2]));
    }
  }
  return t;
}

Matrix encode_body(const InvMLEncoder& enc, const Matrix& x) {
  return forward(enc, x, false).body_output();
}

Matrix embed(const InvMLEncoder& enc, const Matrix& x) { return forward(enc, x, false).embedding; }

Matrix inverse_layer(const InvMLEncoder& enc, std::size_t layer, const Matrix& output) {
  if (layer < 1 || layer > enc.body_layers()) {
    throw Error(ErrorCode::InvalidArgument, "layer index out of range");
  }
  if (output.cols() != enc.input_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "layer output must have m columns");
  }
  const Matrix inv = checked_inverse(enc.body()[layer - 1], layer);
  return matmul_nt(leaky_relu_inverse(output, enc.activation().alpha), inv);
}

Matrix inverse_body(const InvMLEncoder& enc, const Matrix& z_last) {
  if (z_last.cols() != enc.input_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "body output must have m columns");
  }
  Matrix z = z_last;
  for (std::size_t l = enc.body_layers(); l >= 1; --l) z = inverse_layer(enc, l, z);
  return z;
}

std::vector<LayerRoundTrip> layer_round_trips(const InvMLEncoder& enc, const ForwardTrace& trace,
                                              const Matrix& body_output_reconstruction) {
  if (trace.activations.size() != enc.body_layers() + 1) {
    throw Error(ErrorCode::ShapeMismatch, "trace does not match encoder depth");
  }
  std::vector<LayerRoundTrip> out;
  Matrix z = body_output_reconstruction;
  out.push_back({trace.activations.back(), z});
  for (std::size_t l = enc.body_layers(); l >= 1; --l) {
    z = inverse_layer(enc, l, z);
    out.push_back({trace.activations[l - 1], z});
  }
  return out;
}

Matrix invert_head_least_squares(const Matrix& head, const Matrix& y) {
  if (y.cols() != head.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "embedding width differs from head rows");
  }
  if (head.rows() > head.cols()) {
    throw Error(ErrorCode::RankDeficientHead, "head has more rows than columns");
  }
  const ThinQr qr = thin_qr(transpose(head));  // head^T = Q R
  double rmax = 0.0;
  for (std::size_t i = 0; i < qr.r.rows(); ++i) rmax = std::max(rmax, std::abs(qr.r(i, i)));
  for (std::size_t i = 0; i < qr.r.rows(); ++i) {
    if (!(std::abs(qr.r(i, i)) > 1e-12 * rmax) || rmax == 0.0) {
      throw Error(ErrorCode::RankDeficientHead, "head rows are linearly dependent");
    }
  }
  // z Q R = y, minimum norm: z = (y R^{-1}) Q^T.
  Matrix u = y;
  for (std::size_t i = 0; i < u.rows(); ++i) solve_upper_transposed(qr.r, u.row(i));
  return matmul_nt(u, qr.q);
}

Matrix invert_head_least_squares(const InvMLEncoder& enc, const Matrix& y) {
  return invert_head_least_squares(enc.head(), y);
}

namespace {

/// Least squares of `target` on the head columns in `support`. Returns false
/// when the chosen columns are numerically dependent.
bool fit_support(const Matrix& head, std::span<const double> target,
                 const std::vector<std::size_t>& support, std::vector<double>& coef,
                 std::vector<double>& residual) {
  const std::size_t s = head.rows();
  Matrix sub(s, support.size());
  for (std::size_t r = 0; r < s; ++r) {
    for (std::size_t c = 0; c < support.size(); ++c) sub(r, c) = head(r, support[c]);
  }
  const ThinQr qr = thin_qr(sub);
  for (std::size_t c = 0; c < support.size(); ++c) {
    if (!(qr.r(c, c) > 1e-12)) return false;
  }
  coef.assign(support.size(), 0.0);
  for (std::size_t c = 0; c < support.size(); ++c) {
    for (std::size_t r = 0; r < s; ++r) coef[c] += qr.q(r, c) * target[r];
  }
  solve_upper(qr.r, coef);
  for (std::size_t r = 0; r < s; ++r) {
    double fit = 0.0;
    for (std::size_t c = 0; c < support.size(); ++c) fit += sub(r, c) * coef[c];
    residual[r] = target[r] - fit;
  }
  return true;
}

/// Number of supports of size 1..k out of m, saturating at `cap`.
std::size_t support_count(std::size_t m, std::size_t k, std::size_t cap) {
  std::size_t total = 0;
  double binom = 1.0;
  for (std::size_t t = 1; t <= k; ++t) {
    binom = binom * static_cast<double>(m - t + 1) / static_cast<double>(t);
    if (binom + static_cast<double>(total) > static_cast<double>(cap)) return cap;
    total += static_cast<std::size_t>(std::llround(binom));
  }
  return total;
}

/// Smallest support (size <= k, lexicographic within a size) whose least
/// squares fit meets `stop`.
bool exhaustive_support(const Matrix& head, std::span<const double> target, std::size_t k,
                        double stop, std::vector<std::size_t>& support,
                        std::vector<double>& coef) {
  const std::size_t m = head.cols();
  std::vector<double> residual(head.rows());
  for (std::size_t t = 1; t <= k; ++t) {
    support.resize(t);
    for (std::size_t c = 0; c < t; ++c) support[c] = c;
    while (true) {
      if (fit_support(head, target, support, coef, residual) && norm(residual) <= stop) return true;
      std::size_t c = t;
      while (c > 0 && support[c - 1] == m - t + c - 1) --c;
      if (c == 0) break;
      ++support[c - 1];
      for (std::size_t d = c; d < t; ++d) support[d] = support[d - 1] + 1;
    }
  }
  return false;
}

}  // namespace

Matrix invert_head_sparse(const Matrix& head, const Matrix& y, std::size_t sparsity, double tol) {
  const std::size_t s = head.rows();
  const std::size_t m = head.cols();
  if (y.cols() != s) throw Error(ErrorCode::ShapeMismatch, "embedding width differs from head rows");
  if (sparsity == 0 || sparsity > m) {
    throw Error(ErrorCode::InvalidArgument, "sparsity must lie in [1, m]");
  }
  std::vector<double> atom_norm(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t r = 0; r < s; ++r) atom_norm[j] += head(r, j) * head(r, j);
    atom_norm[j] = std::sqrt(atom_norm[j]);
  }
  const std::size_t max_atoms = std::min(sparsity, s);
  const bool can_search = support_count(m, max_atoms, kExhaustiveSupportBudget + 1) <=
                          kExhaustiveSupportBudget;

  Matrix z(y.rows(), m);
  std::vector<double> residual(s);
  for (std::size_t row = 0; row < y.rows(); ++row) {
    const auto target = y.row(row);
    const double stop = tol * std::max(1.0, norm(target));
    std::ranges::copy(target, residual.begin());
    std::vector<std::size_t> support;
    std::vector<double> coef;
    std::vector<char> used(m, 0);
    while (norm(residual) > stop && support.size() < max_atoms) {
      std::size_t best = m;
      double best_score = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        if (used[j] || atom_norm[j] == 0.0) continue;
        double dot = 0.0;
        for (std::size_t r = 0; r < s; ++r) dot += head(r, j) * residual[r];
        const double score = std::abs(dot) / atom_norm[j];
        if (score > best_score) {
          best_score = score;
          best = j;
        }
      }
      if (best == m) break;
      used[best] = 1;
      support.push_back(best);
      if (!fit_support(head, target, support, coef, residual)) break;
    }
    if (norm(residual) > stop) {
      // Greedy selection picked a wrong atom; solve the l0 program directly.
      if (!can_search || !exhaustive_support(head, target, max_atoms, stop, support, coef)) {
        throw Error(ErrorCode::NoConvergence,
                    "sparse recovery of row " + std::to_string(row) + " left residual " +
                        std::to_string(norm(residual)) + " after " +
                        std::to_string(support.size()) + " atoms");
      }
    }
    for (std::size_t c = 0; c < support.size(); ++c) z(row, support[c]) = coef[c];
  }
  return z;
}

Matrix invert_head_sparse(const InvMLEncoder& enc, const Matrix& y, std::size_t sparsity,
                          double tol) {
  return invert_head_sparse(enc.head(), y, sparsity, tol);
}

EncoderVars bind_parameters(Graph& graph, const InvMLEncoder& enc) {
  EncoderVars v;
  for (const auto& w : enc.body()) v.body.push_back(graph.parameter(w));
  v.head = graph.parameter(enc.head());
  for (const auto& h : enc.extra_heads()) v.extra_heads.push_back(graph.parameter(h));
  return v;
}

LossResult total_loss(Graph& graph, const EncoderVars& vars, const InvMLEncoder& enc,
                      const Matrix& x, const LocalNeighborhood& hood, const ScheduleSet& schedule,
                      const LossOptions& options) {
  const std::size_t L = enc.layer_count();
  if (schedule.alpha.size() != L + 1) {
    throw Error(ErrorCode::ShapeMismatch, "schedule depth differs from encoder depth");
  }
  if (vars.body.size() != enc.body_layers() || vars.extra_heads.size() + 2 != L) {
    throw Error(ErrorCode::ShapeMismatch, "bound parameters do not match encoder");
  }
  if (x.cols() != enc.input_dim()) throw Error(ErrorCode::ShapeMismatch, "input width differs from m");

  std::vector<Var> act{graph.constant(x)};
  for (const Var& w : vars.body) {
    act.push_back(ag::leaky_relu(ag::matmul_nt(act.back(), w), enc.activation().alpha));
  }
  const Var y = ag::matmul_nt(act.back(), vars.head);

  std::vector<Var> terms;
  LossBreakdown b;
  const double geo = geometric_scale(hood, options);

  {
    std::vector<Var> ws(vars.body.begin(), vars.body.end());
    std::vector<double> alphas(schedule.alpha.begin() + 1, schedule.alpha.begin() + L);
    Var orth = loss_orth(ws, alphas, options.power_iters);
    if (schedule.alpha[L] != 0.0) {
      const Var head_term = row_orthogonality(vars.head, options.power_iters);
      const Var parts[] = {orth, head_term};
      const double w[] = {1.0, schedule.alpha[L]};
      orth = ag::weighted_sum(parts, w);
    }
    b.orth = orth.value().scalar();
    terms.push_back(orth);
  }
  {
    std::vector<Var> outs;
    std::vector<std::size_t> dims;
    std::vector<double> betas;
    for (std::size_t l = 2; l + 1 <= L; ++l) {
      if (schedule.beta[l] == 0.0) continue;
      outs.push_back(act[l]);
      dims.push_back(schedule.target_dims[l]);
      betas.push_back(schedule.beta[l]);
    }
    if (!outs.empty()) {
      const double rows = options.mean_reduction ? static_cast<double>(x.rows()) : 1.0;
      const Var pad = ag::scale(loss_pad(outs, dims, betas), 1.0 / rows);
      b.pad = pad.value().scalar();
      terms.push_back(pad);
    }
  }
  {
    std::vector<Var> heads;
    std::vector<double> gammas;
    std::vector<double> mus;
    for (std::size_t l = 2; l + 1 <= L; ++l) {
      if (schedule.gamma[l] == 0.0) continue;
      heads.push_back(ag::matmul_nt(act[l], vars.extra_heads[l - 2]));
      gammas.push_back(schedule.gamma[l]);
      mus.push_back(schedule.mu[l]);
    }
    if (!heads.empty()) {
      const Var extra =
          loss_extra(graph, heads, hood, gammas, mus, schedule.push_radius, options);
      b.extra = extra.value().scalar();
      terms.push_back(extra);
    }
  }
  {
    const Var lis = ag::scale(loss_lis(y, hood, options.lis_squared), geo);
    b.lis = lis.value().scalar();
    terms.push_back(lis);
  }
  if (schedule.mu[L] != 0.0) {
    const Var push = ag::scale(loss_push(y, hood, schedule.push_radius, options.push_literal),
                               schedule.mu[L] * geo);
    b.push = push.value().scalar();
    terms.push_back(push);
  }

  const std::vector<double> ones(terms.size(), 1.0);
  const Var total = ag::weighted_sum(terms, ones);
  b.total = total.value().scalar();
  return {total, b};
}

LossBreakdown total_loss(const InvMLEncoder& enc, const Matrix& x, const NeighborGraph& graph,
                         const ScheduleConfig& config, std::size_t epoch,
                         const LossOptions& options) {
  const ScheduleSet schedule = eval_schedules(epoch, config, 3.0 * graph.mean_distance());
  Graph g;
  const EncoderVars vars = bind_parameters(g, enc);
  return total_loss(g, vars, enc, x, LocalNeighborhood::from_graph(graph), schedule, options)
      .breakdown;
}

}  // namespace invml
