#pragma once

#include "scq/codes.hpp"
#include "scq/config.hpp"
#include "scq/dual.hpp"

#include <random>
#include <string>
#include <utility>
#include <vector>

namespace scq {

/// Inner alternation budget per column. On sharply clustered spectra (a few
/// dominant directions over a noise floor) the multiplier/target alternation
/// contracts slowly and has needed a few hundred rounds; rounds cost
/// microseconds, so the budget sits an order of magnitude above the worst
/// observed. Overruns surface as ConvergenceFailure.
inline constexpr int kMaxInner = 1000;

namespace detail {

/// Random direction in the orthogonal complement of `prev` (which spans at
/// most d-1 dimensions here, so a valid draw exists).
inline Vector random_orthogonal_unit(std::mt19937& rng, const std::vector<Vector>& prev,
                                     Index d) {
  std::normal_distribution<double> norm(0.0, 1.0);
  for (int attempt = 0; attempt < 64; ++attempt) {
    Vector g(d);
    for (Index i = 0; i < d; ++i) g(i) = norm(rng);
    for (const Vector& u : prev) g -= (u.dot(g) / u.squaredNorm()) * u;
    const double len = g.norm();
    if (len > 1e-8) return g / len;
  }
  fail(ErrorCode::NumericalFailure,
       "could not draw a direction orthogonal to the current columns");
}

}  // namespace detail

/// Random orthonormal d x L start, deterministic per seed. Column signs are
/// pinned via the QR factor so the result does not depend on sign whims of
/// the factorization.
inline ProjectionMatrix init_V(Index d, Index L, std::uint32_t seed) {
  if (L < 1 || L > d) fail(ErrorCode::InvalidConfig, "need 1 <= L <= d");
  std::mt19937 rng(seed);
  std::normal_distribution<double> norm(0.0, 1.0);
  Matrix G(d, L);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < L; ++j) G(i, j) = norm(rng);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ() * Matrix::Identity(d, L);
  const Matrix& R = qr.matrixQR();
  for (Index j = 0; j < L; ++j)
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  return {std::move(Q), ProjectionKind::Orthonormal};
}

/**
 * Orthonormal-encoder training loop: starting from a random orthonormal V,
 * alternate the closed-form sign step B = sign(XV) with a cyclic sweep that
 * re-solves each column's constrained least-squares problem through its
 * Lagrangian dual, holding B fixed. Stops when the relative loss reduction
 * falls under eps.
 *
 * Column-level failure policy: a degenerate column (target too weak for a
 * unit-norm solution) is replaced by a random direction orthogonal to the
 * columns already placed; an inner alternation that runs out of budget is
 * accepted when its norm error is within 10x the tolerance, otherwise the
 * failure propagates.
 *
 * The column solves are inexact (eps_b, eps_u), so at the convergence plateau
 * a sweep can tick the loss up by tolerance-level noise. Any increase already
 * trips the stopping rule, so the trainer keeps the pre-sweep iterate in that
 * case: the trace records the loss of the state actually returned.
 */
inline std::pair<ProjectionMatrix, LossTrace> train_one(const FeatureMatrix& X,
                                                        const TrainConfig& cfg) {
  if (!X.centered) fail(ErrorCode::InvalidData, "training data must be centered");
  const Index n = X.n(), d = X.dim();
  detail::check_train_config(cfg, d);

  const EigenSystem es = gram_eigendecomposition(X);
  ProjectionMatrix V = init_V(d, cfg.L, cfg.seed);
  std::mt19937 rng(cfg.seed ^ 0x9e3779b9u);  // separate stream for replacements

  LossTrace trace;
  double prev_q = 0.0;
  for (int t = 1; t <= cfg.max_iter; ++t) {
    const BinaryCodes B = compute_B(X, V);
    const Matrix Xt_B = X.data.transpose() * B.codes;
    const Matrix V_before = V.data;

    std::vector<Vector> cols;
    cols.reserve(static_cast<std::size_t>(cfg.L));
    for (Index k = 0; k < cfg.L; ++k) {
      Vector v;
      try {
        if (k == 0) {
          v = solve_column_one(es, Xt_B.col(k), n, cfg.eps_b);
        } else {
          v = solve_column_k(es, Xt_B.col(k), cols, n, cfg.eps_b, cfg.eps_u, kMaxInner)
                  .first;
        }
      } catch (const ColumnConvergenceError& e) {
        if (!(e.norm_error() < 10.0 * cfg.eps_u)) throw;
        v = e.last_column();
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateColumn) throw;
        v = detail::random_orthogonal_unit(rng, cols, d);
        ++trace.degenerate_columns;
      }
      // Project onto the unit constraint; the dual solve only guarantees the
      // norm to eps_u but the returned V promises 1e-6 orthonormality.
      v.normalize();
      cols.push_back(std::move(v));
    }
    for (Index k = 0; k < cfg.L; ++k) V.data.col(k) = cols[static_cast<std::size_t>(k)];

    double q = quantization_loss(B, X, V);
    if (t > 1 && q > prev_q) {
      V.data = V_before;
      q = prev_q;
    }
    trace.values.push_back(q);
    if (t > 1 && (q == 0.0 || (prev_q - q) / q < cfg.eps)) {
      trace.stop_reason = StopReason::Converged;
      break;
    }
    prev_q = q;
  }
  return {std::move(V), std::move(trace)};
}

}  // namespace scq
