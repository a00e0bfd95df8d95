#include "invml/autograd.hpp"

#include <cmath>
#include <string>

#include "invml/error.hpp"
#include "invml/linalg.hpp"

namespace invml {

const Matrix& Var::value() const { return graph_->value(*this); }
const Matrix& Var::grad() const { return graph_->grad(*this); }

const Matrix& BackwardContext::grad_out() const { return graph_.grads_[node_]; }
const Matrix& BackwardContext::value() const { return graph_.nodes_[node_].value; }

const Matrix& BackwardContext::input(std::size_t k) const {
  return graph_.nodes_[graph_.nodes_[node_].inputs.at(k)].value;
}

bool BackwardContext::needs_grad(std::size_t k) const {
  return graph_.nodes_[graph_.nodes_[node_].inputs.at(k)].requires_grad;
}

Matrix& BackwardContext::input_grad(std::size_t k) {
  return graph_.grad_buffer(graph_.nodes_[node_].inputs.at(k));
}

Var Graph::parameter(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Matrix value, std::vector<Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.backward = std::move(backward);
  n.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.graph() != this) {
      throw Error(ErrorCode::InvalidArgument, "input belongs to a different graph");
    }
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Graph::Node& Graph::node(Var v) const {
  if (v.graph() != this || v.id() >= nodes_.size()) {
    throw Error(ErrorCode::InvalidArgument, "variable does not belong to this graph");
  }
  return nodes_[v.id()];
}

const Matrix& Graph::value(Var v) const { return node(v).value; }

const Matrix& Graph::grad(Var v) const {
  const Node& n = node(v);
  if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
  Matrix& g = grads_[v.id()];
  if (g.rows() != n.value.rows() || g.cols() != n.value.cols()) {
    g = Matrix(n.value.rows(), n.value.cols());
  }
  return g;
}

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

Matrix& Graph::grad_buffer(std::size_t id) {
  Matrix& g = grads_[id];
  const Matrix& v = nodes_[id].value;
  if (g.rows() != v.rows() || g.cols() != v.cols()) g = Matrix(v.rows(), v.cols());
  return g;
}

void Graph::zero_grad() { grads_.assign(nodes_.size(), Matrix()); }

void Graph::backward(Var loss) {
  const Node& root = node(loss);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "backward needs a 1x1 loss");
  }
  grads_.assign(nodes_.size(), Matrix());
  grads_[loss.id()] = Matrix(1, 1, 1.0);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || grads_[id].empty() || !n.backward) continue;
    for (std::size_t in : n.inputs) {
      if (in >= id) throw Error(ErrorCode::CycleDetected, "node " + std::to_string(id));
    }
    BackwardContext ctx(*this, id);
    n.backward(ctx);
  }
}

Matrix leaky_relu_forward(const Matrix& z, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "LeakyReLU slope must lie in (0, 1)");
  }
  Matrix out = z;
  for (double& v : out.data()) {
    if (v < 0.0) v *= alpha;
  }
  return out;
}

Matrix leaky_relu_inverse(const Matrix& y, double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "LeakyReLU slope must be > 0");
  Matrix out = y;
  for (double& v : out.data()) {
    if (v < 0.0) v /= alpha;
  }
  return out;
}

namespace ag {
namespace {

Graph& graph_of(Var a) {
  if (!a.valid()) throw Error(ErrorCode::InvalidArgument, "uninitialized variable");
  return *a.graph();
}

}  // namespace

Var matmul(Var a, Var b) {
  return graph_of(a).record(invml::matmul(a.value(), b.value()), {a, b}, [](BackwardContext& c) {
    if (c.needs_grad(0)) c.input_grad(0) += invml::matmul_nt(c.grad_out(), c.input(1));
    if (c.needs_grad(1)) c.input_grad(1) += invml::matmul_tn(c.input(0), c.grad_out());
  });
}

Var matmul_nt(Var a, Var b) {
  return graph_of(a).record(invml::matmul_nt(a.value(), b.value()), {a, b},
                            [](BackwardContext& c) {
                              if (c.needs_grad(0)) c.input_grad(0) += invml::matmul(c.grad_out(), c.input(1));
                              if (c.needs_grad(1)) c.input_grad(1) += invml::matmul_tn(c.grad_out(), c.input(0));
                            });
}

Var matmul_tn(Var a, Var b) {
  return graph_of(a).record(invml::matmul_tn(a.value(), b.value()), {a, b},
                            [](BackwardContext& c) {
                              if (c.needs_grad(0)) c.input_grad(0) += invml::matmul_nt(c.input(1), c.grad_out());
                              if (c.needs_grad(1)) c.input_grad(1) += invml::matmul(c.input(0), c.grad_out());
                            });
}

Var transpose(Var a) {
  return graph_of(a).record(invml::transpose(a.value()), {a}, [](BackwardContext& c) {
    c.input_grad(0) += invml::transpose(c.grad_out());
  });
}

Var add(Var a, Var b) {
  return graph_of(a).record(a.value() + b.value(), {a, b}, [](BackwardContext& c) {
    if (c.needs_grad(0)) c.input_grad(0) += c.grad_out();
    if (c.needs_grad(1)) c.input_grad(1) += c.grad_out();
  });
}

Var sub(Var a, Var b) {
  return graph_of(a).record(a.value() - b.value(), {a, b}, [](BackwardContext& c) {
    if (c.needs_grad(0)) c.input_grad(0) += c.grad_out();
    if (c.needs_grad(1)) c.input_grad(1) -= c.grad_out();
  });
}

Var scale(Var a, double s) {
  return graph_of(a).record(a.value() * s, {a}, [s](BackwardContext& c) {
    c.input_grad(0) += c.grad_out() * s;
  });
}

Var mul(Var a, Var b) {
  return graph_of(a).record(hadamard(a.value(), b.value()), {a, b}, [](BackwardContext& c) {
    if (c.needs_grad(0)) c.input_grad(0) += hadamard(c.grad_out(), c.input(1));
    if (c.needs_grad(1)) c.input_grad(1) += hadamard(c.grad_out(), c.input(0));
  });
}

Var abs(Var a) {
  Matrix out = a.value();
  for (double& v : out.data()) v = std::abs(v);
  return graph_of(a).record(std::move(out), {a}, [](BackwardContext& c) {
    auto g = c.input_grad(0).data();
    auto x = c.input(0).data();
    auto go = c.grad_out().data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) g[i] += go[i];
      else if (x[i] < 0.0) g[i] -= go[i];
    }
  });
}

Var square(Var a) {
  return graph_of(a).record(hadamard(a.value(), a.value()), {a}, [](BackwardContext& c) {
    auto g = c.input_grad(0).data();
    auto x = c.input(0).data();
    auto go = c.grad_out().data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * x[i] * go[i];
  });
}

Var log1p(Var a) {
  Matrix out = a.value();
  for (double& v : out.data()) {
    if (v <= -1.0) throw Error(ErrorCode::InvalidArgument, "log1p argument <= -1");
    v = std::log1p(v);
  }
  return graph_of(a).record(std::move(out), {a}, [](BackwardContext& c) {
    auto g = c.input_grad(0).data();
    auto x = c.input(0).data();
    auto go = c.grad_out().data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] / (1.0 + x[i]);
  });
}

Var leaky_relu(Var a, double alpha) {
  return graph_of(a).record(leaky_relu_forward(a.value(), alpha), {a},
                            [alpha](BackwardContext& c) {
                              auto g = c.input_grad(0).data();
                              auto x = c.input(0).data();
                              auto go = c.grad_out().data();
                              for (std::size_t i = 0; i < g.size(); ++i) {
                                g[i] += x[i] >= 0.0 ? go[i] : alpha * go[i];
                              }
                            });
}

Var sum(Var a) {
  return graph_of(a).record(Matrix(1, 1, invml::sum(a.value())), {a}, [](BackwardContext& c) {
    const double g = c.grad_out()(0, 0);
    for (double& v : c.input_grad(0).data()) v += g;
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  return graph_of(a).record(invml::slice_cols(a.value(), begin, end), {a},
                            [begin](BackwardContext& c) {
                              Matrix& g = c.input_grad(0);
                              const Matrix& go = c.grad_out();
                              for (std::size_t r = 0; r < go.rows(); ++r) {
                                for (std::size_t j = 0; j < go.cols(); ++j) g(r, begin + j) += go(r, j);
                              }
                            });
}

Var pair_distances(Var z, std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  const Matrix& zv = z.value();
  Matrix out(pairs.size(), 1);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    if (i >= zv.rows() || j >= zv.rows()) {
      throw Error(ErrorCode::InvalidArgument, "pair index out of range");
    }
    out(p, 0) = distance(zv.row(i), zv.row(j));
  }
  std::vector<std::pair<std::size_t, std::size_t>> kept(pairs.begin(), pairs.end());
  return graph_of(z).record(std::move(out), {z}, [kept = std::move(kept)](BackwardContext& c) {
    Matrix& g = c.input_grad(0);
    const Matrix& zz = c.input(0);
    const Matrix& d = c.value();
    const Matrix& go = c.grad_out();
    const std::size_t m = zz.cols();
    for (std::size_t p = 0; p < kept.size(); ++p) {
      const double dist = d(p, 0);
      if (dist == 0.0) continue;
      const double w = go(p, 0) / dist;
      const auto [i, j] = kept[p];
      for (std::size_t k = 0; k < m; ++k) {
        const double diff = w * (zz(i, k) - zz(j, k));
        g(i, k) += diff;
        g(j, k) -= diff;
      }
    }
  });
}

Var spectral_norm(Var a, std::size_t n_iter) {
  const Matrix& av = a.value();
  if (max_abs(av) == 0.0) {
    return graph_of(a).record(Matrix(1, 1), {a}, [](BackwardContext&) {});
  }
  SpectralNormResult sn = invml::spectral_norm(av, n_iter);
  return graph_of(a).record(
      Matrix(1, 1, sn.value), {a},
      [u = std::move(sn.left), v = std::move(sn.right)](BackwardContext& c) {
        Matrix& g = c.input_grad(0);
        const double go = c.grad_out()(0, 0);
        for (std::size_t i = 0; i < u.size(); ++i) {
          for (std::size_t j = 0; j < v.size(); ++j) g(i, j) += go * u[i] * v[j];
        }
      });
}

Var weighted_sum(std::span<const Var> terms, std::span<const double> weights) {
  if (terms.empty() || terms.size() != weights.size()) {
    throw Error(ErrorCode::InvalidArgument, "weighted_sum needs matching nonempty inputs");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) total += weights[i] * terms[i].value().scalar();
  std::vector<Var> inputs(terms.begin(), terms.end());
  std::vector<double> w(weights.begin(), weights.end());
  return graph_of(terms[0]).record(Matrix(1, 1, total), std::move(inputs),
                                   [w = std::move(w)](BackwardContext& c) {
                                     const double go = c.grad_out()(0, 0);
                                     for (std::size_t k = 0; k < w.size(); ++k) {
                                       if (c.needs_grad(k)) c.input_grad(k)(0, 0) += go * w[k];
                                     }
                                   });
}

}  // namespace ag
}  // namespace invml
