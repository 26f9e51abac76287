#pragma once

#include "scq/common.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <string>

// Deterministic data generators shared across the test suite.
namespace scqtest {

using scq::Index;
using scq::Matrix;
using scq::Vector;

/// For CHECK_THROWS_MATCHES on scq::Error: asserts the machine-readable code.
class ErrorCodeIs : public Catch::Matchers::MatcherBase<scq::Error> {
 public:
  explicit ErrorCodeIs(scq::ErrorCode want) : want_(want) {}
  bool match(const scq::Error& e) const override { return e.code() == want_; }
  std::string describe() const override {
    return "has error code " + std::to_string(static_cast<int>(want_));
  }

 private:
  scq::ErrorCode want_;
};

inline Matrix gaussian(Index n, Index d, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> norm(0.0, 1.0);
  Matrix m(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) m(i, j) = norm(rng);
  return m;
}

/// Gaussian with per-column standard deviations.
inline Matrix gaussian_scaled(Index n, Index d, unsigned seed, const Vector& sigma) {
  Matrix m = gaussian(n, d, seed);
  for (Index j = 0; j < d; ++j) m.col(j) *= sigma(j);
  return m;
}

/// Columns with variance falling off as 1/(j+1): a spread-out spectrum.
inline Matrix decaying_spectrum(Index n, Index d, unsigned seed) {
  Matrix m = gaussian(n, d, seed);
  for (Index j = 0; j < d; ++j) m.col(j) /= std::sqrt(static_cast<double>(j + 1));
  return m;
}

/**
 * Two elongated 2-d clusters at +-2 along the first axis, rotated 30 degrees
 * so neither cluster axis lines up with a coordinate. With `substructure` each
 * cluster splits into two tight sub-clusters offset +-0.27 in y, which gives
 * the second axis signal that only shows up once the data is magnified.
 */
inline Matrix two_cluster(Index n, unsigned seed, bool substructure = false) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> norm(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  const double c = std::cos(3.14159265358979323846 / 6.0);
  const double s = std::sin(3.14159265358979323846 / 6.0);
  Matrix m(n, 2);
  for (Index i = 0; i < n; ++i) {
    const double cx = coin(rng) ? 2.0 : -2.0;
    double x = cx + 0.5 * norm(rng);
    double y;
    if (substructure) {
      y = (coin(rng) ? 0.27 : -0.27) + 0.03 * norm(rng);
    } else {
      y = 0.05 * norm(rng);
    }
    m(i, 0) = c * x - s * y;
    m(i, 1) = s * x + c * y;
  }
  return m;
}

}  // namespace scqtest
