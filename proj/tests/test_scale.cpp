#include <cmath>
#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "scq/scale.hpp"
#include "support.hpp"

namespace {

using namespace scq;
using scqtest::ErrorCodeIs;

TEST_CASE("scale formula on known spectra", "[scale]") {
  Vector ev(2);
  ev << 4.0, 1.0;
  REQUIRE(compute_scale(ev, 1) == 0.5);
  REQUIRE(compute_scale(ev, 2) == Catch::Approx(0.6324555320336759).margin(1e-15));

  // Top eigenvalues summing to L are the normalization fixed point.
  Vector fixed(2);
  fixed << 1.5, 0.5;
  REQUIRE(compute_scale(fixed, 2) == Catch::Approx(1.0).margin(1e-15));

  CHECK_THROWS_MATCHES(compute_scale(ev, 0), Error, ErrorCodeIs(ErrorCode::InvalidConfig));
  CHECK_THROWS_MATCHES(compute_scale(ev, 3), Error, ErrorCodeIs(ErrorCode::InvalidConfig));
  Vector dead(2);
  dead << 0.0, 0.0;
  CHECK_THROWS_MATCHES(compute_scale(dead, 1), Error,
                       ErrorCodeIs(ErrorCode::DegenerateSpectrum));
}

TEST_CASE("scale formula is inverse-homogeneous in the data", "[scale]") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> unif(0.1, 5.0);
  Vector ev(6);
  for (Index i = 0; i < 6; ++i) ev(i) = unif(rng);
  std::sort(ev.data(), ev.data() + 6, std::greater<>());
  for (Index L : {1, 3, 6}) {
    const double s = compute_scale(ev, L);
    for (double c : {0.1, 3.0, 10.0})
      REQUIRE(compute_scale(ev * c * c, L) * c == Catch::Approx(s).epsilon(1e-12));
    // s * sqrt(sum/L) rearranges to exactly 1.
    REQUIRE(s * std::sqrt(ev.head(L).sum() / static_cast<double>(L)) ==
            Catch::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("unit-ball scale comes from the largest row norm", "[scale]") {
  Matrix rows(2, 2);
  rows << 3.0, 4.0, -3.0, -4.0;
  const FeatureMatrix X{rows, true, 1.0};
  REQUIRE(compute_s_max_var(X) == Catch::Approx(0.2).margin(1e-15));

  // Data already inside the unit ball never needs shrinking.
  const FeatureMatrix small = X.scaled(0.1);
  REQUIRE(compute_s_max_var(small) >= 1.0);
  // Homogeneity: scaling the data by c divides the bound by c.
  REQUIRE(compute_s_max_var(X.scaled(4.0)) ==
          Catch::Approx(0.05).epsilon(1e-12));

  const FeatureMatrix zero{Matrix::Zero(3, 2), true, 1.0};
  CHECK_THROWS_MATCHES(compute_s_max_var(zero), Error,
                       ErrorCodeIs(ErrorCode::DegenerateData));
}

TEST_CASE("variance fraction is 1 on the principal basis", "[scale]") {
  const auto [X, mean] = zero_center(scqtest::decaying_spectrum(100, 6, 13));
  const Vector variances = gram_eigenvalues_desc(X) / 100.0;
  const auto [axes, eig] = pca_fit(X, 6);

  const ProjectionMatrix top2{axes.leftCols(2), ProjectionKind::Orthonormal};
  REQUIRE(retained_variance_fraction(X, top2, variances, 2) ==
          Catch::Approx(1.0).margin(1e-8));

  // The bottom pair retains exactly its own eigenvalue share.
  const ProjectionMatrix bottom2{axes.rightCols(2), ProjectionKind::Orthonormal};
  const double want = (variances(4) + variances(5)) / (variances(0) + variances(1));
  REQUIRE(retained_variance_fraction(X, bottom2, variances, 2) ==
          Catch::Approx(want).epsilon(1e-8));

  const ProjectionMatrix free_norms{axes.leftCols(2) * 0.5, ProjectionKind::Orthogonal};
  CHECK_THROWS_MATCHES(retained_variance_fraction(X, free_norms, variances, 2), Error,
                       ErrorCodeIs(ErrorCode::InvalidInput));
  CHECK_THROWS_MATCHES(retained_variance_fraction(X, top2, variances, 3), Error,
                       ErrorCodeIs(ErrorCode::InvalidInput));
}

TEST_CASE("log grid spans the requested bracket", "[scale]") {
  const auto grid = log_spaced_grid(0.25, 16.0, 7);
  REQUIRE(grid.size() == 7);
  REQUIRE(grid.front() == Catch::Approx(16.0).epsilon(1e-12));
  REQUIRE(grid.back() == Catch::Approx(0.25).epsilon(1e-12));
  for (std::size_t i = 1; i < grid.size(); ++i) {
    REQUIRE(grid[i] < grid[i - 1]);
    // log-spaced: constant ratio between neighbors
    REQUIRE(grid[i] / grid[i - 1] ==
            Catch::Approx(grid[1] / grid[0]).epsilon(1e-10));
  }
  // One point lands on the geometric midpoint: the formula scale when the
  // bracket is the default [s/8, 8s].
  const double s = 0.7;
  const auto one = log_spaced_grid(s / 8.0, 8.0 * s, 1);
  REQUIRE(one.size() == 1);
  REQUIRE(one[0] == Catch::Approx(s).epsilon(1e-12));

  CHECK_THROWS_MATCHES(log_spaced_grid(2.0, 1.0, 4), Error,
                       ErrorCodeIs(ErrorCode::InvalidConfig));
  CHECK_THROWS_MATCHES(log_spaced_grid(1.0, 2.0, 0), Error,
                       ErrorCodeIs(ErrorCode::InvalidConfig));
}

// The two-cluster toy with sub-cluster structure: at the unit-ball scale the
// single bit follows the top principal axis; magnifying the data lets the
// bit trade top-axis variance for the finer structure, and the per-bit loss
// falls while the retained fraction collapses.
TEST_CASE("toy sweep trades variance for quantization as the scale grows", "[scale]") {
  const auto [X, mean] = zero_center(scqtest::two_cluster(200, 5, true));
  const double smv = compute_s_max_var(X);
  TrainConfig cfg;
  cfg.seed = 45;
  // Deliberately unsorted: the sweep orders rows by descending scale.
  const auto rows = sweep_scale(X, 1, {smv, 12.0 * smv, 4.0 * smv}, cfg);
  REQUIRE(rows.size() == 3);
  REQUIRE(rows[0].s == Catch::Approx(12.0 * smv));
  REQUIRE(rows[1].s == Catch::Approx(4.0 * smv));
  REQUIRE(rows[2].s == Catch::Approx(smv));
  for (const auto& row : rows) {
    REQUIRE(row.error.empty());
    REQUIRE(row.mean_gap >= 0.0);
  }
  REQUIRE(rows[0].per_bit_loss <= rows[1].per_bit_loss);
  REQUIRE(rows[1].per_bit_loss <= rows[2].per_bit_loss);
  REQUIRE(rows[2].retained_fraction > rows[0].retained_fraction);
}

TEST_CASE("a one-point sweep is a single training run", "[scale]") {
  const auto [X, mean] = zero_center(scqtest::gaussian(120, 8, 19));
  const Vector variances = gram_eigenvalues_desc(X) / 120.0;
  const double s = compute_scale(variances, 4);
  TrainConfig cfg;
  cfg.L = 4;
  cfg.seed = 21;
  const auto rows = sweep_scale(X, 4, {s}, cfg);
  REQUIRE(rows.size() == 1);
  auto [V, trace] = train_one(X.scaled(s), cfg);
  REQUIRE(rows[0].per_bit_loss == trace.values.back() / 4.0);
}

TEST_CASE("a failing grid point is recorded and the sweep continues", "[scale]") {
  const auto [X, mean] = zero_center(scqtest::gaussian(30, 4, 23));
  TrainConfig cfg;
  cfg.seed = 25;
  // 1e160 overflows the gram matrix; the point fails, the other trains.
  const auto rows = sweep_scale(X, 2, {0.5, 1e160}, cfg);
  REQUIRE(rows.size() == 2);
  REQUIRE_FALSE(rows[0].error.empty());
  REQUIRE(rows[1].error.empty());
  REQUIRE(rows[1].per_bit_loss > 0.0);

  CHECK_THROWS_MATCHES(sweep_scale(X, 2, {}, cfg), Error,
                       ErrorCodeIs(ErrorCode::InvalidConfig));
  CHECK_THROWS_MATCHES(sweep_scale(X, 2, {0.5, -1.0}, cfg), Error,
                       ErrorCodeIs(ErrorCode::InvalidConfig));
}

}  // namespace
