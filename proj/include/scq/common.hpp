#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace scq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class ErrorCode {
  InvalidData,
  InvalidConfig,
  InvalidInput,
  FormatError,
  UnsupportedVersion,
  CorruptModel,
  NumericalFailure,
  SingularRegularization,
  OutOfBracket,
  DegenerateColumn,
  ConvergenceFailure,
  DegenerateSpectrum,
  DegenerateData,
};

/**
 * Library-wide error type. Every failure carries an ErrorCode so callers
 * (including the CLI's exit-code mapping) never have to match on message text.
 */
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

/**
 * Raised when the per-column (nu, phi) alternation exhausts its iteration
 * budget. Carries the last iterate; the trainer decides whether the result is
 * close enough to keep.
 */
class ColumnConvergenceError : public Error {
 public:
  ColumnConvergenceError(Vector last_column, double norm_error)
      : Error(ErrorCode::ConvergenceFailure,
              "column solve did not reach unit norm, |v'v - 1| = " +
                  std::to_string(norm_error)),
        last_column_(std::move(last_column)),
        norm_error_(norm_error) {}

  const Vector& last_column() const noexcept { return last_column_; }
  double norm_error() const noexcept { return norm_error_; }

 private:
  Vector last_column_;
  double norm_error_;
};

// Operation counters, in the style of global stats blocks in ANN libraries.
// Tests reset them to assert factorization-count invariants.
struct LinalgStats {
  std::atomic<std::uint64_t> eigendecompositions{0};

  void reset() noexcept { eigendecompositions = 0; }
};

inline LinalgStats linalg_stats;

}  // namespace scq
