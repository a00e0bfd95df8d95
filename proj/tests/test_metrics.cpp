#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "invml/datasets.hpp"
#include "invml/error.hpp"
#include "invml/metrics.hpp"
#include "invml/random.hpp"
#include "oracles.hpp"

using invml::Matrix;

TEST_CASE("metrics match brute-force references") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix x = testing::random_matrix(40, 4, seed);
    Matrix z = invml::slice_cols(x, 0, 2);
    z += testing::random_matrix(40, 2, 100 + seed) * 0.3;
    CHECK(invml::trustworthiness(x, z, 5, 10) ==
          doctest::Approx(oracle::trust(x, z, 5, 10)).epsilon(1e-12));
    CHECK(invml::continuity(x, z, 5, 10) ==
          doctest::Approx(oracle::cont(x, z, 5, 10)).epsilon(1e-12));
    const auto both = invml::trust_and_continuity(x, z, 5, 10);
    CHECK(both.trust == invml::trustworthiness(x, z, 5, 10));
    CHECK(both.cont == invml::continuity(x, z, 5, 10));

    const auto bl = invml::bi_lipschitz(x, z, invml::knn_graph(x, 5));
    const auto [lo, hi] = oracle::bi_lipschitz(x, z, 5);
    CHECK(bl.k_min == doctest::Approx(lo).epsilon(1e-12));
    CHECK(bl.k_max == doctest::Approx(hi).epsilon(1e-12));

    CHECK(invml::latent_mse(x, z) == doctest::Approx(oracle::latent_mse(x, z)).epsilon(1e-12));
    const Matrix y = x + testing::random_matrix(40, 4, 200 + seed) * 0.01;
    CHECK(invml::rmse(x, y) == doctest::Approx(oracle::rmse(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("metric closed forms") {
  CHECK(invml::rmse(Matrix{{0.0, 0.0}}, Matrix{{3.0, 4.0}}) == doctest::Approx(5.0));
  // Two samples each off by one unit: sqrt(2 / 4).
  CHECK(invml::rmse(Matrix{{0.0}, {0.0}}, Matrix{{1.0}, {1.0}}) == doctest::Approx(std::sqrt(0.5)));

  const Matrix x{{0.0}, {1.0}};
  const Matrix z{{0.0}, {2.0}};
  // |1 - 2| for both ordered pairs over N^2 = 4.
  CHECK(invml::latent_mse(x, z) == doctest::Approx(std::sqrt(0.5)));

  const Matrix line = testing::random_matrix(20, 3, 1);
  const auto bl = invml::bi_lipschitz(line, line * 2.0, invml::knn_graph(line, 4));
  CHECK(bl.k_min == doctest::Approx(2.0));
  CHECK(bl.k_max == doctest::Approx(2.0));

  const std::vector<invml::LayerRoundTrip> trips{{Matrix{{1.0, 2.0}}, Matrix{{1.5, 2.0}}},
                                                 {Matrix{{0.0}}, Matrix{{-0.25}}}};
  CHECK(invml::mne(trips) == 0.5);
}

TEST_CASE("identical spaces give perfect neighbourhood scores") {
  const Matrix x = testing::random_matrix(30, 3, 2);
  CHECK(invml::trustworthiness(x, x, 2, 5) == doctest::Approx(1.0));
  CHECK(invml::continuity(x, x * 3.0, 2, 5) == doctest::Approx(1.0));
}

TEST_CASE("trust and continuity swap with their arguments") {
  const Matrix x = testing::random_matrix(35, 3, 3);
  const Matrix z = testing::random_matrix(35, 2, 4);
  CHECK(invml::trustworthiness(x, z, 5, 10) == doctest::Approx(invml::continuity(z, x, 5, 10)).epsilon(1e-14));
}

TEST_CASE("neighbourhood scores are invariant to sample order") {
  const Matrix x = testing::random_matrix(30, 3, 5);
  const Matrix z = testing::random_matrix(30, 2, 6);
  invml::Rng rng(7);
  const auto perm = rng.permutation(30);
  const Matrix xp = invml::select_rows(x, perm);
  const Matrix zp = invml::select_rows(z, perm);
  CHECK(invml::trustworthiness(xp, zp, 3, 6) == doctest::Approx(invml::trustworthiness(x, z, 3, 6)).epsilon(1e-12));
  CHECK(invml::continuity(xp, zp, 3, 6) == doctest::Approx(invml::continuity(x, z, 3, 6)).epsilon(1e-12));
}

TEST_CASE("neighbourhood range is validated") {
  const Matrix x = testing::random_matrix(10, 2, 1);
  CHECK_THROWS_AS(invml::trustworthiness(x, x, 0, 3), invml::Error);
  CHECK_THROWS_AS(invml::trustworthiness(x, x, 4, 3), invml::Error);
  try {
    invml::trustworthiness(x, x, 5, 9);
    FAIL("expected KRangeInvalid");
  } catch (const invml::Error& e) {
    CHECK(e.code() == invml::ErrorCode::KRangeInvalid);
  }
}

TEST_CASE("classifiers separate well-separated classes") {
  invml::Rng rng(1);
  Matrix z(200, 2);
  std::vector<int> labels(200);
  for (std::size_t i = 0; i < 200; ++i) {
    labels[i] = static_cast<int>(i % 2);
    z(i, 0) = rng.normal() * 0.3 + (labels[i] == 0 ? -3.0 : 3.0);
    z(i, 1) = rng.normal();
  }
  CHECK(invml::acc_logistic_10fold(z, labels, 1) >= 0.99);
  CHECK(invml::acc_knn(z, labels, 5, 1) >= 0.99);

  rng.shuffle(labels);
  CHECK(std::abs(invml::acc_logistic_10fold(z, labels, 1) - 0.5) <= 0.1);
  CHECK(std::abs(invml::acc_knn(z, labels, 5, 1) - 0.5) <= 0.1);
}

TEST_CASE("stratified folds balance every class") {
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c) labels.insert(labels.end(), 20, c);
  const auto folds = invml::stratified_folds(labels, 10, 4);
  REQUIRE(folds.size() == labels.size());
  for (std::size_t f = 0; f < 10; ++f) {
    for (int c = 0; c < 3; ++c) {
      int count = 0;
      for (std::size_t i = 0; i < labels.size(); ++i) count += (folds[i] == f && labels[i] == c);
      CHECK(count == 2);
    }
  }
}

TEST_CASE("subsampled latent MSE stays close to the exact value") {
  const Matrix x = testing::random_matrix(3000, 3, 8);
  const Matrix z = invml::slice_cols(x, 0, 2);
  const double exact = invml::latent_mse(x, z, 0, 3000);
  const double approx = invml::latent_mse(x, z, 0, 2000);
  CHECK(std::abs(approx - exact) <= 0.02 * exact);
}

TEST_CASE("metrics report serialises optional fields as empty") {
  invml::MetricsReport r;
  r.layer = "L";
  r.trust = 0.5;
  const std::string row = invml::to_csv_row(r);
  CHECK(invml::csv_header() ==
        "layer,rmse,mne,trust,cont,k_min,k_max,l_mse,acc_logistic,acc_knn,rank,k1,k2");
  CHECK(row.rfind("L,,,", 0) == 0);
}
