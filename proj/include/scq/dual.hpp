#pragma once

#include "scq/linalg.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace scq {

/**
 * Per-column dual solver state. For column k the multipliers are the scalar
 * nu (norm constraint) and the length k-1 vector phi (orthogonality against
 * the earlier columns); phi is empty for the first column.
 */
struct DualState {
  double nu = 0.0;
  Vector phi;
  Index k = 1;
  int inner_iters = 0;
};

/// The linear system A*phi = c that makes column k orthogonal to its
/// predecessors. A is symmetric; both shrink to 0x0 for the first column.
struct ColumnSystem {
  Matrix A;
  Vector c;
};

namespace detail {

// Gradient of the column dual in nu, with the target already rotated into
// the eigenbasis (w = U' * X'b). Each evaluation is O(d), which is what
// makes the bisection cheap enough to sit inside the per-column loop.
inline double gradient_from_rotated(const EigenSystem& es, const Vector& w, double nu,
                                    Index n) {
  const double shift = static_cast<double>(n) * nu;
  double sum = 0.0;
  for (Index j = 0; j < w.size(); ++j) {
    const double denom = es.eigenvalues(j) + shift;
    sum += (w(j) / denom) * (w(j) / denom);
  }
  return sum - 1.0;
}

// Smallest admissible nu, pushed a hair above the pole at -lambda_min/n so
// the first gradient evaluation cannot divide by zero.
inline double nu_bracket_lower(const EigenSystem& es, Index n) {
  const double nd = static_cast<double>(n);
  const double guard = std::max(1e-12, 1e-9 * (es.lambda_max() + 1.0) / nd);
  return -es.lambda_min() / nd + guard;
}

}  // namespace detail

/**
 * d/dnu of the dual value for a single column: ||(X'X + n*nu*I)^{-1} t||^2 - 1
 * where t is the (possibly phi-adjusted) target. Strictly decreasing in nu,
 * +inf at the pole, -1 at +inf, so it crosses zero exactly once.
 */
inline double dual_gradient_v1(const EigenSystem& es, const Vector& Xt_b, double nu,
                               Index n) {
  if (!(nu > -es.lambda_min() / static_cast<double>(n)))
    fail(ErrorCode::OutOfBracket,
         "nu = " + std::to_string(nu) + " is not above the pole at " +
             std::to_string(-es.lambda_min() / static_cast<double>(n)));
  const Vector w = es.eigenvectors.transpose() * Xt_b;
  return detail::gradient_from_rotated(es, w, nu, n);
}

/**
 * Finds the unique root of the dual gradient by bisection. The upper end of
 * the bracket is grown by doubling until the gradient goes negative.
 *
 * A target that cannot support a unit-norm solution (zero, or orthogonal to
 * the bottom eigenspace with too little mass elsewhere) has no root; that is
 * DegenerateColumn and the caller decides how to replace the column.
 */
inline double solve_nu(const EigenSystem& es, const Vector& effective_target, Index n,
                       double eps_b) {
  if (!(eps_b > 0.0)) fail(ErrorCode::InvalidConfig, "eps_b must be positive");
  if (effective_target.squaredNorm() == 0.0)
    fail(ErrorCode::DegenerateColumn, "zero target has no unit-norm solution");

  const Vector w = es.eigenvectors.transpose() * effective_target;
  const double lower = detail::nu_bracket_lower(es, n);
  if (!(detail::gradient_from_rotated(es, w, lower, n) > 0.0))
    fail(ErrorCode::DegenerateColumn,
         "dual gradient is not positive at the bracket floor; the target is "
         "too weak to reach unit norm");

  double offset = 1.0;
  while (detail::gradient_from_rotated(es, w, lower + offset, n) >= 0.0) {
    offset *= 2.0;
    if (offset > 1152921504606846976.0)  // 2^60
      fail(ErrorCode::NumericalFailure, "nu bracket expansion exceeded 2^60");
  }

  double lo = lower;
  double hi = lower + offset;
  for (;;) {
    const double mid = 0.5 * (lo + hi);
    const double g = detail::gradient_from_rotated(es, w, mid, n);
    if (std::abs(g) <= eps_b) return mid;
    // Interval at machine resolution with |g| still above tolerance: the
    // root sits on a near-pole cliff, which happens exactly when the target
    // barely reaches the unit sphere. Same remedy as a zero target.
    if (mid <= lo || mid >= hi)
      fail(ErrorCode::DegenerateColumn,
           "dual root at nu = " + std::to_string(mid) +
               " is too sharp to meet the tolerance; the column has no "
               "stable unit-norm solution");
    (g > 0.0 ? lo : hi) = mid;
  }
}

/**
 * Assembles A_ij = (n/2) v_i' Z v_j and c_i = v_i' Z X'b for Z =
 * (X'X + n*nu_k*I)^{-1}, using one regularized-inverse application per prior
 * column. c reuses the same products because Z is symmetric.
 */
inline ColumnSystem build_column_system(const EigenSystem& es, double nu_k,
                                        const std::vector<Vector>& prev_cols,
                                        const Vector& Xt_b, Index n) {
  const auto m = static_cast<Index>(prev_cols.size());
  for (Index i = 0; i < m; ++i)
    for (Index j = i + 1; j < m; ++j)
      if (std::abs(prev_cols[i].dot(prev_cols[j])) > 1e-6)
        fail(ErrorCode::InvalidInput,
             "columns " + std::to_string(i) + " and " + std::to_string(j) +
                 " are not orthogonal");

  ColumnSystem sys;
  sys.A.resize(m, m);
  sys.c.resize(m);
  std::vector<Vector> z(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i)
    z[static_cast<std::size_t>(i)] = apply_regularized_inverse(es, nu_k, prev_cols[static_cast<std::size_t>(i)]);
  const double half_n = 0.5 * static_cast<double>(n);
  for (Index i = 0; i < m; ++i) {
    sys.c(i) = z[static_cast<std::size_t>(i)].dot(Xt_b);
    for (Index j = 0; j < m; ++j)
      sys.A(i, j) = half_n * prev_cols[static_cast<std::size_t>(i)].dot(z[static_cast<std::size_t>(j)]);
  }
  return sys;
}

/// Closed-form multiplier solve phi = A^{-1} c. A singular A (numerically
/// repeated geometry) falls back to the minimum-norm least-squares solution.
inline Vector solve_phi(const ColumnSystem& sys) {
  if (sys.A.rows() != sys.A.cols() || sys.A.rows() < 1)
    fail(ErrorCode::InvalidInput, "phi solve needs a square nonempty system");
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(sys.A.rows(), sys.A.cols());
  cod.setThreshold(1e-10);
  cod.compute(sys.A);
  return cod.solve(sys.c);
}

/// First column: nothing to stay orthogonal to, so the dual is the nu search
/// alone and v1 = Z X'b1 lands on the unit sphere up to the search tolerance.
inline Vector solve_column_one(const EigenSystem& es, const Vector& Xt_b1, Index n,
                               double eps_b) {
  const double nu = solve_nu(es, Xt_b1, n, eps_b);
  return apply_regularized_inverse(es, nu, Xt_b1);
}

/**
 * Column k: alternate (phi fixed -> bisect nu) and (nu fixed -> closed-form
 * phi), then rebuild v_k = Z(X'b_k - (n/2) sum phi_i v_i). Orthogonality to
 * the prior columns holds after every phi solve (its residual is exactly
 * v_k' v_i), so only the unit norm needs iterating.
 */
inline std::pair<Vector, DualState> solve_column_k(const EigenSystem& es,
                                                   const Vector& Xt_bk,
                                                   const std::vector<Vector>& prev_cols,
                                                   Index n, double eps_b, double eps_u,
                                                   int max_inner) {
  if (max_inner < 1) fail(ErrorCode::InvalidConfig, "max_inner must be at least 1");
  const auto m = static_cast<Index>(prev_cols.size());
  const double half_n = 0.5 * static_cast<double>(n);

  DualState state;
  state.k = m + 1;
  state.phi = Vector::Zero(m);

  Vector v;
  double norm_err = 0.0;
  for (int inner = 1; inner <= max_inner; ++inner) {
    state.inner_iters = inner;
    Vector target = Xt_bk;
    for (Index i = 0; i < m; ++i)
      target -= half_n * state.phi(i) * prev_cols[static_cast<std::size_t>(i)];
    state.nu = solve_nu(es, target, n, eps_b);

    const ColumnSystem sys = build_column_system(es, state.nu, prev_cols, Xt_bk, n);
    state.phi = solve_phi(sys);

    target = Xt_bk;
    for (Index i = 0; i < m; ++i)
      target -= half_n * state.phi(i) * prev_cols[static_cast<std::size_t>(i)];
    v = apply_regularized_inverse(es, state.nu, target);
    norm_err = std::abs(v.squaredNorm() - 1.0);
    if (norm_err < eps_u) return {std::move(v), std::move(state)};
  }
  throw ColumnConvergenceError(std::move(v), norm_err);
}

}  // namespace scq
