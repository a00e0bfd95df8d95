#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "invml/autograd.hpp"

namespace testing {

using invml::Graph;
using invml::Matrix;
using invml::Var;

/// Builds a scalar loss from leaf parameters bound in a fresh graph.
using LossBuilder = std::function<Var(Graph&, const std::vector<Var>&)>;

struct GradCheck {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

/// Central differences with step h against the reverse-mode gradient.
/// Relative error is |a - f| / max(1, |a|, |f|) per entry.
inline GradCheck check_gradients(const LossBuilder& build, const std::vector<Matrix>& leaves,
                                 double h = 1e-6) {
  const auto evaluate = [&](const std::vector<Matrix>& at) {
    Graph g;
    std::vector<Var> vars;
    for (const auto& m : at) vars.push_back(g.parameter(m));
    return build(g, vars).value().scalar();
  };
  Graph g;
  std::vector<Var> vars;
  for (const auto& m : leaves) vars.push_back(g.parameter(m));
  const Var loss = build(g, vars);
  g.backward(loss);

  GradCheck out;
  std::vector<Matrix> probe = leaves;
  for (std::size_t p = 0; p < leaves.size(); ++p) {
    const Matrix analytic = vars[p].grad();
    for (std::size_t e = 0; e < leaves[p].size(); ++e) {
      const double orig = leaves[p].data()[e];
      probe[p].data()[e] = orig + h;
      const double up = evaluate(probe);
      probe[p].data()[e] = orig - h;
      const double down = evaluate(probe);
      probe[p].data()[e] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double a = analytic.data()[e];
      const double abs_err = std::abs(a - fd);
      out.max_abs_error = std::max(out.max_abs_error, abs_err);
      out.max_rel_error =
          std::max(out.max_rel_error, abs_err / std::max({1.0, std::abs(a), std::abs(fd)}));
    }
  }
  return out;
}

}  // namespace testing
