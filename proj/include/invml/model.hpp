#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "invml/autograd.hpp"
#include "invml/datasets.hpp"
#include "invml/losses.hpp"
#include "invml/matrix.hpp"
#include "invml/metrics.hpp"

namespace invml {

inline constexpr double kInverseWarnCondition = 1e12;
inline constexpr double kInverseErrorCondition = 1e14;

/// Invertible manifold-learning encoder.
///
/// The body is L-1 bias-free square layers z <- LeakyReLU(z W_l^T) acting on
/// row vectors; the head (s' x m) maps the last body output to the
/// embedding. Extra heads (s_l x m, l = 2..L-1) read the output of body
/// layer l and are only used as training targets.
class InvMLEncoder {
 public:
  InvMLEncoder() = default;
  InvMLEncoder(std::size_t input_dim, std::size_t target_dim, std::size_t layers,
               ActivationSpec activation = {});

  /// Random orthogonal body, head and extra heads taken from rows of random
  /// orthogonal matrices.
  static InvMLEncoder initialized(std::size_t input_dim, std::size_t target_dim,
                                  std::size_t layers, std::uint64_t seed,
                                  ActivationSpec activation = {});
  /// Identity body; heads select the leading coordinates.
  static InvMLEncoder identity(std::size_t input_dim, std::size_t target_dim, std::size_t layers,
                               ActivationSpec activation = {});

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t target_dim() const noexcept { return target_dim_; }
  std::size_t layer_count() const noexcept { return layers_; }
  std::size_t body_layers() const noexcept { return body_.size(); }
  const ActivationSpec& activation() const noexcept { return activation_; }
  /// s_l for l = 2..L-1 (index l, size L).
  const std::vector<std::size_t>& extra_dims() const noexcept { return extra_dims_; }

  std::vector<Matrix>& body() noexcept { return body_; }
  const std::vector<Matrix>& body() const noexcept { return body_; }
  Matrix& head() noexcept { return head_; }
  const Matrix& head() const noexcept { return head_; }
  /// extra_heads()[l - 2] belongs to layer l.
  std::vector<Matrix>& extra_heads() noexcept { return extra_heads_; }
  const std::vector<Matrix>& extra_heads() const noexcept { return extra_heads_; }

  /// Throws ShapeMismatch if any matrix disagrees with the declared dims.
  void validate() const;

 private:
  std::size_t input_dim_ = 0;
  std::size_t target_dim_ = 0;
  std::size_t layers_ = 0;
  ActivationSpec activation_;
  std::vector<std::size_t> extra_dims_;
  std::vector<Matrix> body_;
  Matrix head_;
  std::vector<Matrix> extra_heads_;
};

struct ForwardTrace {
  /// activations[0] is the input, activations[l] the output of body layer l.
  std::vector<Matrix> activations;
  Matrix embedding;
  /// head_outputs[l - 2] is extra head l applied to activations[l].
  std::vector<Matrix> head_outputs;

  const Matrix& body_output() const { return activations.back(); }
};

ForwardTrace forward(const InvMLEncoder& enc, const Matrix& x, bool with_extra_heads = true);
Matrix encode_body(const InvMLEncoder& enc, const Matrix& x);
Matrix embed(const InvMLEncoder& enc, const Matrix& x);

/// Exact algebraic inverse of the body: z <- LeakyReLU^{-1}(z) W_l^{-T}, last layer first.
Matrix inverse_body(const InvMLEncoder& enc, const Matrix& z_last);

/// Inverse of a single body layer.
Matrix inverse_layer(const InvMLEncoder& enc, std::size_t layer, const Matrix& output);

/// Per-layer round trips starting from a reconstruction of the last body
/// output; compare each layer input with its reconstruction.
std::vector<LayerRoundTrip> layer_round_trips(const InvMLEncoder& enc, const ForwardTrace& trace,
                                              const Matrix& body_output_reconstruction);

/// Minimum-norm z with z head^T = y.
Matrix invert_head_least_squares(const Matrix& head, const Matrix& y);
Matrix invert_head_least_squares(const InvMLEncoder& enc, const Matrix& y);

inline constexpr std::size_t kExhaustiveSupportBudget = 200000;

/// Orthogonal matching pursuit per row: at most `sparsity` atoms (columns of
/// the head), stopping once the residual is below tol * max(1, ||y||). When
/// the greedy support misses the tolerance and at most
/// kExhaustiveSupportBudget supports exist, the smallest exact support is
/// found by enumeration instead.
Matrix invert_head_sparse(const Matrix& head, const Matrix& y, std::size_t sparsity,
                          double tol = 1e-8);
Matrix invert_head_sparse(const InvMLEncoder& enc, const Matrix& y, std::size_t sparsity,
                          double tol = 1e-8);

/// Encoder parameters bound to a graph.
struct EncoderVars {
  std::vector<Var> body;
  Var head;
  std::vector<Var> extra_heads;
};

EncoderVars bind_parameters(Graph& graph, const InvMLEncoder& enc);

struct LossResult {
  Var total;
  LossBreakdown breakdown;
};

/// L_orth (body + head rows) + L_pad + L_extra + LIS and mu_L push on the embedding.
LossResult total_loss(Graph& graph, const EncoderVars& vars, const InvMLEncoder& enc,
                      const Matrix& x, const LocalNeighborhood& hood, const ScheduleSet& schedule,
                      const LossOptions& options = {});

/// Convenience: evaluates the loss breakdown of `enc` at one epoch.
LossBreakdown total_loss(const InvMLEncoder& enc, const Matrix& x, const NeighborGraph& graph,
                         const ScheduleConfig& config, std::size_t epoch,
                         const LossOptions& options = {});

}  // namespace invml
