#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "invml/autograd.hpp"
#include "invml/datasets.hpp"

namespace invml {

/// Loss weights and their epoch/layer schedules.
///
/// Epoch breakpoints are fractions of `epochs_total` (the reference run used
/// 10000 epochs with breakpoints 500/2000/8000).
struct ScheduleConfig {
  std::size_t epochs_total = 10000;
  std::size_t input_dim = 0;   // m
  std::size_t target_dim = 0;  // s'
  std::size_t layers = 8;      // L

  double alpha0 = 1.0;
  double beta_min = 0.01;
  double beta_max = 0.1;
  double gamma0 = 1.0;
  double mu_min = 0.1;
  double mu_max = 1.0;

  double alpha_ramp_begin = 0.05;
  double alpha_ramp_end = 0.2;
  double gamma_decay_begin = 0.2;
  double gamma_decay_end = 0.8;

  /// Push-away radius B; 0 selects 3 x mean input k-NN distance.
  double push_radius = 0.0;

  bool use_orth = true;
  bool use_pad = true;
  bool use_extra = true;
};

/// Weights at one epoch. Vectors are indexed by layer number l (index 0 unused).
///   alpha: l = 1..L (l = L is the head's row-orthogonality term)
///   beta, gamma, target_dims: l = 2..L-1
///   mu: l = 2..L (l = L weights push-away on the embedding)
struct ScheduleSet {
  std::size_t epoch = 0;
  std::size_t epochs_total = 0;
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> gamma;
  std::vector<double> mu;
  std::vector<std::size_t> target_dims;
  double push_radius = 0.0;
};

/// s_l = round(m (s'/m)^((l-1)/(L-2))) for l = 2..L-1, clamped to be
/// nonincreasing and >= s'. Returned vector is indexed by l (size L).
std::vector<std::size_t> layer_target_dims(std::size_t m, std::size_t target_dim,
                                           std::size_t layers);

ScheduleSet eval_schedules(std::size_t epoch, const ScheduleConfig& config,
                           double push_radius);

struct LossOptions {
  bool lis_squared = false;
  /// Push-away over j in N_i (formula as printed) instead of j not in N_i.
  bool push_literal = false;
  std::size_t power_iters = 5;
  /// Divides LIS and push-away by the neighbour-pair count and padding by the
  /// batch size, so weights do not scale with n or k.
  bool mean_reduction = true;
};

/// Neighbourhood structure the geometric losses are evaluated against,
/// in local row indices of the batch.
struct LocalNeighborhood {
  std::size_t n = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (i, j) with j in N_i
  std::vector<double> input_distances;                     // d_X(i, j) per pair
  std::vector<std::vector<std::size_t>> neighbors;         // N_i per row

  static LocalNeighborhood from_graph(const NeighborGraph& graph);
  /// Anchors keep their full neighbourhoods; `members` receives the global
  /// row index of every local row (anchors first, then added neighbours).
  static LocalNeighborhood for_block(const NeighborGraph& graph,
                                     std::span<const std::size_t> anchors,
                                     std::vector<std::size_t>& members);
};

/// 1 / pair count under mean reduction, else 1.
double geometric_scale(const LocalNeighborhood& hood, const LossOptions& options);

struct LossBreakdown {
  double orth = 0.0;
  double pad = 0.0;
  double lis = 0.0;
  double push = 0.0;
  double extra = 0.0;
  double total = 0.0;
};

/// sum_l alpha_l * rho(W_l^T W_l - I).
Var loss_orth(std::span<const Var> weights, std::span<const double> alphas,
              std::size_t power_iters = 5);
/// rho(H H^T - I): row orthogonality of a compression head.
Var row_orthogonality(Var head, std::size_t power_iters = 5);

/// sum_l beta_l * sum over rows of sum_{i >= s_l} |z_i|.
Var loss_pad(std::span<const Var> outputs, std::span<const std::size_t> target_dims,
             std::span<const double> betas);

/// sum over (i, j in N_i) of |d_X(i,j) - d_Z(i,j)| (squared when requested).
Var loss_lis(Var z, const LocalNeighborhood& hood, bool squared = false);
Var loss_lis(const Matrix& x, Var z, const NeighborGraph& graph, bool squared = false);

/// -sum over active ordered pairs with d_Z < radius of log(1 + d_Z).
/// Active pairs are j not in N_i (default) or j in N_i (`literal`).
Var loss_push(Var z, const LocalNeighborhood& hood, double radius, bool literal = false);
Var loss_push(Var z, const NeighborGraph& graph, double radius, bool literal = false);

/// sum_l gamma_l (LIS(head_l) + mu_l push(head_l)); terms with gamma_l = 0 are skipped.
Var loss_extra(Graph& graph, std::span<const Var> head_outputs, const LocalNeighborhood& hood,
               std::span<const double> gammas, std::span<const double> mus, double radius,
               const LossOptions& options = {});

}  // namespace invml
