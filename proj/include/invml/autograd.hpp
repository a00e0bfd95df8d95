#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "invml/matrix.hpp"

namespace invml {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t id() const noexcept { return id_; }
  Graph* graph() const noexcept { return graph_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// View handed to a node's backward rule.
class BackwardContext {
 public:
  const Matrix& grad_out() const;
  const Matrix& value() const;
  const Matrix& input(std::size_t k) const;
  bool needs_grad(std::size_t k) const;
  /// Gradient buffer of input k, zero-initialized on first use.
  Matrix& input_grad(std::size_t k);

 private:
  friend class Graph;
  BackwardContext(Graph& g, std::size_t node) : graph_(g), node_(node) {}

  Graph& graph_;
  std::size_t node_;
};

using BackwardFn = std::function<void(BackwardContext&)>;

/// Append-only tape of matrix-valued nodes for reverse-mode differentiation.
///
/// Nodes only reference earlier nodes, so the tape is a topological order.
/// Not thread-safe; use one graph per thread.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var parameter(Matrix value);
  Var constant(Matrix value);
  Var record(Matrix value, std::vector<Var> inputs, BackwardFn backward);

  /// Populates gradients of every node that depends on a parameter.
  void backward(Var loss);
  void zero_grad();

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  friend class BackwardContext;

  struct Node {
    Matrix value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;
  Matrix& grad_buffer(std::size_t id);

  // Deque: values stay addressable while later nodes are recorded.
  std::deque<Node> nodes_;
  mutable std::vector<Matrix> grads_;
};

struct ActivationSpec {
  double alpha = 0.1;
};

Matrix leaky_relu_forward(const Matrix& z, double alpha);
Matrix leaky_relu_inverse(const Matrix& y, double alpha);

/// Differentiable operations. Every rule is the exact vector-Jacobian
/// product of its forward map (|x| and LeakyReLU use slope 0 / alpha at 0).
namespace ag {

Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);
Var matmul_tn(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var mul(Var a, Var b);
Var abs(Var a);
Var square(Var a);
Var log1p(Var a);
Var leaky_relu(Var a, double alpha);
Var sum(Var a);
Var slice_cols(Var a, std::size_t begin, std::size_t end);

/// Euclidean distance between rows pairs[p].first and pairs[p].second,
/// as a P x 1 column. The gradient at a zero distance is taken as 0.
Var pair_distances(Var z, std::span<const std::pair<std::size_t, std::size_t>> pairs);

/// Largest singular value (1x1). Gradient u v^T with the power-iteration
/// vectors held constant; an all-zero input yields 0 with zero gradient.
Var spectral_norm(Var a, std::size_t n_iter);

/// Sum of scalar nodes with fixed weights.
Var weighted_sum(std::span<const Var> terms, std::span<const double> weights);

}  // namespace ag
}  // namespace invml
