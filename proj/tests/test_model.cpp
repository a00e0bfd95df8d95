#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "helpers.hpp"
#include "invml/datasets.hpp"
#include "invml/error.hpp"
#include "invml/model.hpp"
#include "oracles.hpp"

using invml::InvMLEncoder;
using invml::Matrix;

namespace {

Matrix nonnegative(std::size_t n, std::size_t m, std::uint64_t seed) {
  Matrix x = testing::random_matrix(n, m, seed);
  for (double& v : x.data()) v = std::abs(v);
  return x;
}

invml::ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const invml::Error& e) {
    return e.code();
  }
  FAIL("expected an invml::Error");
  return invml::ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("encoder shapes") {
  const auto enc = InvMLEncoder::initialized(10, 3, 6, 1);
  CHECK(enc.body_layers() == 5);
  CHECK(enc.head().rows() == 3);
  CHECK(enc.head().cols() == 10);
  CHECK(enc.extra_heads().size() == 4);
  for (std::size_t l = 2; l <= 5; ++l) CHECK(enc.extra_heads()[l - 2].rows() == enc.extra_dims()[l]);
  CHECK(enc.extra_dims()[5] == 3);
  enc.validate();
  CHECK_THROWS_AS(InvMLEncoder(3, 2, 4, invml::ActivationSpec{1.5}), invml::Error);
}

TEST_CASE("identity body passes nonnegative input through") {
  const auto enc = InvMLEncoder::identity(4, 2, 5);
  const Matrix x = nonnegative(6, 4, 2);
  const auto t = invml::forward(enc, x);
  CHECK(t.body_output() == x);
  CHECK(t.activations.size() == 5);
  CHECK(t.activations.front() == x);
  CHECK(invml::inverse_body(enc, x) == x);
  CHECK(t.embedding == invml::slice_cols(x, 0, 2));
}

TEST_CASE("hand-evaluated single layer") {
  InvMLEncoder enc(2, 1, 3);
  enc.body()[0] = Matrix{{1.0, 0.0}, {0.0, -1.0}};
  const auto t = invml::forward(enc, Matrix{{1.0, 1.0}});
  CHECK(t.activations[1](0, 0) == 1.0);
  CHECK(t.activations[1](0, 1) == doctest::Approx(-0.1).epsilon(1e-15));
}

TEST_CASE("forward rejects a wrong input width") {
  const auto enc = InvMLEncoder::initialized(5, 2, 4, 1);
  CHECK(code_of([&] { invml::forward(enc, Matrix(3, 4)); }) == invml::ErrorCode::ShapeMismatch);
}

TEST_CASE("orthogonal encoders invert exactly") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto enc = InvMLEncoder::initialized(7, 2, 8, seed);
    const Matrix x = testing::random_matrix(20, 7, 50 + seed);
    const auto t = invml::forward(enc, x);
    CHECK(invml::max_abs_diff(invml::inverse_body(enc, t.body_output()), x) <= 1e-9);
    CHECK(invml::mne(invml::layer_round_trips(enc, t, t.body_output())) <= 1e-9);
  }
}

TEST_CASE("round trip stays exact for moderately conditioned weights") {
  auto enc = InvMLEncoder::initialized(6, 2, 5, 3);
  invml::Rng rng(4);
  for (auto& w : enc.body()) w += rng.gaussian(6, 6, 0.3);
  const Matrix x = testing::random_matrix(30, 6, 5);
  const auto t = invml::forward(enc, x);
  CHECK(invml::max_abs_diff(invml::inverse_body(enc, t.body_output()), x) <=
        1e-7 * std::max(1.0, invml::max_abs(x)));
}

TEST_CASE("inverse of a singular layer is reported") {
  auto enc = InvMLEncoder::identity(3, 2, 3);
  enc.body()[1] = Matrix{{1.0, 2.0, 0.0}, {2.0, 4.0, 0.0}, {0.0, 0.0, 1.0}};
  const auto c = code_of([&] { invml::inverse_body(enc, Matrix(1, 3, 1.0)); });
  CHECK((c == invml::ErrorCode::SingularMatrix || c == invml::ErrorCode::IllConditioned));
}

TEST_CASE("orthogonal positive-regime body preserves distances") {
  // Permutation matrices keep nonnegative inputs nonnegative.
  auto enc = InvMLEncoder::identity(4, 2, 4);
  enc.body()[0] = Matrix{{0, 1, 0, 0}, {0, 0, 1, 0}, {1, 0, 0, 0}, {0, 0, 0, 1}};
  enc.body()[2] = Matrix{{0, 0, 0, 1}, {1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}};
  const Matrix x = nonnegative(12, 4, 6);
  const Matrix z = invml::encode_body(enc, x);
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = 0; j < 12; ++j) {
      CHECK(std::abs(oracle::dist(x, i, j) - oracle::dist(z, i, j)) <= 1e-9);
    }
  }
}

TEST_CASE("embedding is linear in the body output") {
  const auto enc = InvMLEncoder::initialized(5, 2, 4, 9);
  const Matrix a = testing::random_matrix(3, 5, 1);
  const Matrix b = testing::random_matrix(3, 5, 2);
  const Matrix sum = invml::matmul_nt(a + b, enc.head());
  CHECK(invml::max_abs_diff(sum, invml::matmul_nt(a, enc.head()) + invml::matmul_nt(b, enc.head())) <=
        1e-12);
}

TEST_CASE("extra heads do not affect forward or inverse outputs") {
  auto enc = InvMLEncoder::initialized(6, 2, 5, 4);
  const Matrix x = testing::random_matrix(10, 6, 3);
  const auto before = invml::forward(enc, x, false);
  for (auto& h : enc.extra_heads()) h *= 3.0;
  const auto after = invml::forward(enc, x, false);
  CHECK(before.embedding == after.embedding);
  CHECK(invml::inverse_body(enc, before.body_output()) ==
        invml::inverse_body(enc, after.body_output()));
}

TEST_CASE("least-squares head inversion") {
  const Matrix y = testing::random_matrix(4, 2, 1);
  const Matrix sel{{1, 0, 0, 0}, {0, 1, 0, 0}};
  const Matrix z = invml::invert_head_least_squares(sel, y);
  CHECK(invml::max_abs_diff(z, invml::pad_cols(y, 4)) <= 1e-14);

  const Matrix q = testing::random_orthogonal(5, 2);
  const Matrix rows = invml::select_rows(q, std::vector<std::size_t>{0, 1, 2});
  const Matrix y3 = testing::random_matrix(4, 3, 8);
  CHECK(invml::max_abs_diff(invml::invert_head_least_squares(rows, y3), invml::matmul(y3, rows)) <=
        1e-12);

  const Matrix head = testing::random_matrix(3, 6, 9);
  const Matrix zz = invml::invert_head_least_squares(head, y3);
  CHECK(invml::max_abs_diff(invml::matmul_nt(zz, head), y3) <= 1e-9);

  const Matrix deficient{{1, 0, 0}, {2, 0, 0}};
  CHECK(code_of([&] { invml::invert_head_least_squares(deficient, Matrix(1, 2)); }) ==
        invml::ErrorCode::RankDeficientHead);
}

TEST_CASE("sparse head inversion") {
  const Matrix q = testing::random_orthogonal(20, 3);
  Matrix head(10, 20);
  for (std::size_t r = 0; r < 10; ++r) std::ranges::copy(q.row(r), head.row(r).begin());

  Matrix z0(1, 20);
  z0(0, 7) = 2.5;
  const Matrix y = invml::matmul_nt(z0, head);
  const Matrix z = invml::invert_head_sparse(head, y, 1);
  CHECK(invml::max_abs_diff(z, z0) <= 1e-6);

  CHECK(invml::invert_head_sparse(head, Matrix(2, 10), 3) == Matrix(2, 20));

  // Full support coincides with least squares on a square head.
  const Matrix square = testing::random_orthogonal(6, 4);
  const Matrix ys = testing::random_matrix(3, 6, 5);
  CHECK(invml::max_abs_diff(invml::invert_head_sparse(square, ys, 6),
                            invml::invert_head_least_squares(square, ys)) <= 1e-9);

  const Matrix dense = testing::random_matrix(1, 10, 6);
  CHECK(code_of([&] { invml::invert_head_sparse(head, dense, 1); }) == invml::ErrorCode::NoConvergence);
}

TEST_CASE("total loss of an isometric identity is zero") {
  // 2-D data embedded in itself: the selector head is an isometry.
  const auto enc = InvMLEncoder::identity(2, 2, 4);
  const Matrix x = nonnegative(12, 2, 3);
  const auto graph = invml::knn_graph(x, 3);
  invml::ScheduleConfig c;
  c.input_dim = 2;
  c.target_dim = 2;
  c.layers = 4;
  c.epochs_total = 10;
  c.gamma0 = 0.0;
  c.beta_min = c.beta_max = 0.0;
  c.alpha0 = 0.0;
  c.mu_min = c.mu_max = 0.0;
  const auto b = invml::total_loss(enc, x, graph, c, 3);
  CHECK(b.total == 0.0);
  CHECK(b.extra == 0.0);
}

TEST_CASE("total loss equals the sum of separately computed components") {
  auto enc = InvMLEncoder::initialized(5, 2, 4, 6);
  invml::Rng rng(8);
  for (auto& w : enc.body()) w += rng.gaussian(5, 5, 0.2);
  enc.head() += rng.gaussian(2, 5, 0.2);
  const Matrix x = testing::random_matrix(10, 5, 7);
  const auto graph = invml::knn_graph(x, 3);
  invml::ScheduleConfig c;
  c.input_dim = 5;
  c.target_dim = 2;
  c.layers = 4;
  c.epochs_total = 100;
  invml::LossOptions raw;
  raw.mean_reduction = false;
  raw.power_iters = 400;
  const double radius = 3.0 * graph.mean_distance();
  const std::size_t epoch = 30;
  const auto b = invml::total_loss(enc, x, graph, c, epoch, raw);
  CHECK(b.total == doctest::Approx(b.orth + b.pad + b.lis + b.push + b.extra).epsilon(1e-12));

  const auto s = invml::eval_schedules(epoch, c, radius);
  const auto t = invml::forward(enc, x);
  double orth = 0.0;
  for (std::size_t l = 1; l <= 3; ++l) orth += s.alpha[l] * oracle::orth_defect(enc.body()[l - 1]);
  {
    Matrix hh = invml::matmul_nt(enc.head(), enc.head());
    for (std::size_t i = 0; i < hh.rows(); ++i) hh(i, i) -= 1.0;
    orth += s.alpha[4] * oracle::sigma_max(hh);
  }
  double pad = 0.0;
  for (std::size_t l = 2; l <= 3; ++l) {
    const Matrix& z = t.activations[l];
    for (std::size_t i = 0; i < z.rows(); ++i) {
      for (std::size_t c2 = s.target_dims[l]; c2 < z.cols(); ++c2) pad += s.beta[l] * std::abs(z(i, c2));
    }
  }
  double extra = 0.0;
  for (std::size_t l = 2; l <= 3; ++l) {
    const Matrix& h = t.head_outputs[l - 2];
    extra += s.gamma[l] * (oracle::lis(x, h, 3) + s.mu[l] * oracle::push(x, h, 3, radius));
  }
  CHECK(b.orth == doctest::Approx(orth).epsilon(1e-6));
  CHECK(b.pad == doctest::Approx(pad).epsilon(1e-12));
  CHECK(b.lis == doctest::Approx(oracle::lis(x, t.embedding, 3)).epsilon(1e-12));
  CHECK(b.push == doctest::Approx(s.mu[4] * oracle::push(x, t.embedding, 3, radius)).epsilon(1e-12));
  CHECK(b.extra == doctest::Approx(extra).epsilon(1e-12));

  invml::LossOptions mean = raw;
  mean.mean_reduction = true;
  const auto m = invml::total_loss(enc, x, graph, c, epoch, mean);
  CHECK(m.orth == doctest::Approx(b.orth));
  CHECK(m.pad == doctest::Approx(b.pad / 10.0).epsilon(1e-12));
  CHECK(m.lis == doctest::Approx(b.lis / 30.0).epsilon(1e-12));
  CHECK(m.extra == doctest::Approx(b.extra / 30.0).epsilon(1e-12));
}

TEST_CASE("gamma zero leaves the extra component at zero") {
  const auto enc = InvMLEncoder::initialized(4, 2, 5, 1);
  const Matrix x = testing::random_matrix(9, 4, 2);
  invml::ScheduleConfig c;
  c.input_dim = 4;
  c.target_dim = 2;
  c.layers = 5;
  c.epochs_total = 10;
  c.use_extra = false;
  CHECK(invml::total_loss(enc, x, invml::knn_graph(x, 2), c, 1).extra == 0.0);
}

TEST_CASE("sparse inversion recovers the true support when greedy selection is misled") {
  // The third atom correlates best with e1 + e2, but no support containing it
  // reproduces y with two atoms.
  const double eps = 0.1;
  const double nrm = std::sqrt(2.0 + eps * eps);
  const Matrix head{{1.0, 0.0, 1.0 / nrm}, {0.0, 1.0, 1.0 / nrm}, {0.0, 0.0, eps / nrm}};
  const Matrix y{{1.0, 1.0, 0.0}};
  const Matrix z = invml::invert_head_sparse(head, y, 2);
  CHECK(z(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(z(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(z(0, 2) == 0.0);
}
