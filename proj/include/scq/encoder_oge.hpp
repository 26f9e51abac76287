#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "scq/encoder_one.hpp"

namespace scq {

/**
 * Grows the orthogonality-constraint system one accepted column at a time.
 * For a fixed ridge operator Z = (X'X + n.mu.I)^-1 the system matrix
 * A_ij = (n/2) v_i' Z v_j over the accepted columns gains exactly one row
 * and column per new v, so a sweep reuses everything computed for the
 * earlier columns. z caches Z v_i alongside. Reset the cache whenever the
 * column set it was built from is discarded (each outer iteration).
 */
struct IncrementalSystem {
  Matrix A;
  std::vector<Vector> z;
};

/**
 * First-column update: an unconstrained ridge regression of the sign target
 * onto the features, v1 = (X'X + n.mu.I)^-1 X'b1, evaluated in the
 * eigenbasis of the gram matrix.
 */
inline Vector solve_v1_oge(const EigenSystem& es, const Vector& Xt_b1, Index n,
                           double mu) {
  if (es.n != n) fail(ErrorCode::InvalidInput, "sample count does not match the eigensystem");
  return apply_regularized_inverse(es, mu, Xt_b1);
}

namespace detail {

// Extends the cache to cover all of prev_cols, checking each newly admitted
// column against the ones already cached. Appending column m costs one
// ridge apply and m inner products; nothing cached is recomputed.
inline void sync_incremental_system(IncrementalSystem& cache, const EigenSystem& es,
                                    const std::vector<Vector>& prev_cols, Index n,
                                    double mu) {
  const std::size_t have = cache.z.size();
  const std::size_t want = prev_cols.size();
  if (have > want)
    fail(ErrorCode::InvalidInput, "constraint cache covers columns that no longer exist");
  if (have == want) return;
  Matrix grown = Matrix::Zero(static_cast<Index>(want), static_cast<Index>(want));
  grown.topLeftCorner(cache.A.rows(), cache.A.cols()) = cache.A;
  cache.A = std::move(grown);
  for (std::size_t m = have; m < want; ++m) {
    for (std::size_t j = 0; j < m; ++j)
      if (std::abs(prev_cols[m].dot(prev_cols[j])) > 1e-6)
        fail(ErrorCode::InvalidInput, "earlier columns are not pairwise orthogonal");
    cache.z.push_back(apply_regularized_inverse(es, mu, prev_cols[m]));
    const Index mi = static_cast<Index>(m);
    for (std::size_t j = 0; j <= m; ++j) {
      const double a = 0.5 * static_cast<double>(n) * prev_cols[j].dot(cache.z[m]);
      cache.A(static_cast<Index>(j), mi) = a;
      cache.A(mi, static_cast<Index>(j)) = a;
    }
  }
}

}  // namespace detail

/**
 * k-th column update under pairwise-orthogonality constraints against the
 * already placed columns. With the ridge operator fixed, the multipliers
 * have the closed form Phi = A^-1 c, so unlike the orthonormal solver there
 * is no inner iteration: one multiplier solve, one ridge apply.
 *
 * Throws DegenerateColumn when the deflated target X'b - (n/2) sum phi_i v_i
 * is exactly zero: the ridge image of zero is the zero column, which would
 * emit a constant bit.
 */
inline Vector solve_vk_oge(const EigenSystem& es, const Vector& Xt_bk,
                           const std::vector<Vector>& prev_cols, Index n, double mu,
                           IncrementalSystem& cache) {
  if (es.n != n) fail(ErrorCode::InvalidInput, "sample count does not match the eigensystem");
  if (prev_cols.empty())
    fail(ErrorCode::InvalidInput, "k-th column solve needs at least one earlier column");
  detail::sync_incremental_system(cache, es, prev_cols, n, mu);

  const Index k1 = static_cast<Index>(prev_cols.size());
  Vector c(k1);
  for (Index i = 0; i < k1; ++i) c(i) = cache.z[static_cast<std::size_t>(i)].dot(Xt_bk);
  const Vector phi = solve_phi(ColumnSystem{cache.A, c});

  Vector target = Xt_bk;
  for (Index i = 0; i < k1; ++i)
    target -= (0.5 * static_cast<double>(n) * phi(i)) * prev_cols[static_cast<std::size_t>(i)];
  if ((target.array() == 0.0).all())
    fail(ErrorCode::DegenerateColumn, "deflated column target is exactly zero");
  return apply_regularized_inverse(es, mu, target);
}

/**
 * Orthogonal-encoder training loop: the same sign-step / column-sweep
 * alternation as the orthonormal trainer, but each column is a closed-form
 * ridge solve, the unit-norm constraint is replaced by the mu penalty, and
 * columns only have to stay mutually orthogonal. The trace records the full
 * penalized objective (quantization term plus mu times the summed squared
 * column norms), and the stopping ratio is taken on it.
 *
 * A degenerate column is replaced by a random direction orthogonal to the
 * placed columns, scaled to their mean norm so the substitute blends in the
 * penalized objective. The terminal rollback guard works as in the
 * orthonormal trainer.
 */
inline std::pair<ProjectionMatrix, LossTrace> train_oge(const FeatureMatrix& X,
                                                        const TrainConfig& cfg) {
  if (!X.centered) fail(ErrorCode::InvalidData, "training data must be centered");
  const Index n = X.n(), d = X.dim();
  detail::check_train_config(cfg, d);
  if (!(cfg.mu > 0.0))
    fail(ErrorCode::InvalidConfig, "the orthogonal encoder needs a positive norm penalty mu");

  const EigenSystem es = gram_eigendecomposition(X);
  ProjectionMatrix V{init_V(d, cfg.L, cfg.seed).data, ProjectionKind::Orthogonal};
  std::mt19937 rng(cfg.seed ^ 0x9e3779b9u);  // separate stream for replacements

  LossTrace trace;
  double prev_q = 0.0;
  for (int t = 1; t <= cfg.max_iter; ++t) {
    const BinaryCodes B = compute_B(X, V);
    const Matrix Xt_B = X.data.transpose() * B.codes;
    const Matrix V_before = V.data;

    std::vector<Vector> cols;
    cols.reserve(static_cast<std::size_t>(cfg.L));
    IncrementalSystem cache;
    for (Index k = 0; k < cfg.L; ++k) {
      Vector v;
      try {
        if (k == 0) {
          if ((Xt_B.col(0).array() == 0.0).all())
            fail(ErrorCode::DegenerateColumn, "first-column target is exactly zero");
          v = solve_v1_oge(es, Xt_B.col(0), n, cfg.mu);
        } else {
          v = solve_vk_oge(es, Xt_B.col(k), cols, n, cfg.mu, cache);
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateColumn) throw;
        double mean_norm = 1.0;
        if (!cols.empty()) {
          mean_norm = 0.0;
          for (const Vector& u : cols) mean_norm += u.norm();
          mean_norm /= static_cast<double>(cols.size());
        }
        v = detail::random_orthogonal_unit(rng, cols, d) * mean_norm;
        ++trace.degenerate_columns;
      }
      cols.push_back(std::move(v));
    }
    for (Index k = 0; k < cfg.L; ++k) V.data.col(k) = cols[static_cast<std::size_t>(k)];

    double q = quantization_loss(B, X, V) + cfg.mu * V.data.squaredNorm();
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
