#pragma once

#include "scq/common.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace scq {

/**
 * Row-per-sample feature matrix with preprocessing metadata.
 *
 * `centered` promises near-zero column means; `applied_scale` records the
 * global multiplier already baked into `data` (1.0 if none). Construction
 * validates both so downstream code can rely on the flags.
 */
struct FeatureMatrix {
  Matrix data;
  bool centered = false;
  double applied_scale = 1.0;

  FeatureMatrix() = default;

  FeatureMatrix(Matrix m, bool centered_flag, double scale)
      : data(std::move(m)), centered(centered_flag), applied_scale(scale) {
    if (data.rows() < 1 || data.cols() < 1)
      fail(ErrorCode::InvalidData, "feature matrix must be at least 1x1");
    if (!data.allFinite())
      fail(ErrorCode::InvalidData, "feature matrix contains non-finite entries");
    if (!(applied_scale > 0.0))
      fail(ErrorCode::InvalidData, "applied_scale must be positive");
    if (centered) {
      for (Index j = 0; j < data.cols(); ++j) {
        const double mean = data.col(j).mean();
        const double tol = 1e-9 * (data.col(j).cwiseAbs().maxCoeff() + 1.0);
        if (std::abs(mean) > tol)
          fail(ErrorCode::InvalidData,
               "column " + std::to_string(j) + " mean " + std::to_string(mean) +
                   " breaks the centered invariant");
      }
    }
  }

  Index n() const { return data.rows(); }
  Index dim() const { return data.cols(); }

  /// Same data multiplied by s; centering survives, scales compose.
  FeatureMatrix scaled(double s) const {
    return FeatureMatrix(data * s, centered, applied_scale * s);
  }
};

/**
 * Eigendecomposition of the Gram matrix X'X, eigenvalues ascending (smallest
 * first) and clamped at zero. Powers the O(d^2) application of
 * (X'X + n*nu*I)^{-1} without ever forming the inverse.
 */
struct EigenSystem {
  Vector eigenvalues;   // ascending; entries below 1e-8 * max clamped to 0
  Matrix eigenvectors;  // column j pairs with eigenvalues[j]
  Index n = 0;          // sample count of the matrix that built this

  double lambda_min() const { return eigenvalues(0); }
  double lambda_max() const { return eigenvalues(eigenvalues.size() - 1); }
};

enum class ProjectionKind { Orthonormal, Orthogonal };

/**
 * d x L projection, columns are the learned directions. Orthonormal means
 * V'V = I; Orthogonal only promises pairwise-uncorrelated columns (V'V
 * diagonal, arbitrary positive norms).
 */
struct ProjectionMatrix {
  Matrix data;
  ProjectionKind kind = ProjectionKind::Orthonormal;
};

/// Invariant check used by model loading; reports the first violation.
inline bool check_projection(const ProjectionMatrix& V, std::string* why = nullptr) {
  const Matrix gram = V.data.transpose() * V.data;
  const Index L = gram.rows();
  for (Index i = 0; i < L; ++i) {
    for (Index j = 0; j < L; ++j) {
      const double want = (i == j && V.kind == ProjectionKind::Orthonormal) ? 1.0 : 0.0;
      if (i == j && V.kind == ProjectionKind::Orthogonal) {
        if (!(gram(i, i) > 0.0)) {
          if (why) *why = "column " + std::to_string(i) + " has non-positive norm";
          return false;
        }
        continue;
      }
      if (std::abs(gram(i, j) - want) > 1e-6) {
        if (why)
          *why = "V'V entry (" + std::to_string(i) + "," + std::to_string(j) +
                 ") = " + std::to_string(gram(i, j)) + " breaks the " +
                 (V.kind == ProjectionKind::Orthonormal ? "orthonormal" : "orthogonal") +
                 " invariant";
        return false;
      }
    }
  }
  return true;
}

/// Subtracts column means. Returns the centered matrix and the means.
inline std::pair<FeatureMatrix, Vector> zero_center(const Matrix& raw) {
  if (raw.rows() < 1 || raw.cols() < 1)
    fail(ErrorCode::InvalidData, "cannot center an empty matrix");
  if (!raw.allFinite())
    fail(ErrorCode::InvalidData, "input contains non-finite entries");
  Vector mean = raw.colwise().mean();
  Matrix centered = raw.rowwise() - mean.transpose();
  return {FeatureMatrix(std::move(centered), true, 1.0), std::move(mean)};
}

namespace detail {

// Shared by gram_eigendecomposition and pca_fit (the latter has no
// centering precondition). Eigen returns eigenvalues already ascending.
inline EigenSystem eigensystem_of_gram(const Matrix& data, Index n) {
  const Matrix gram = data.transpose() * data;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram);
  if (solver.info() != Eigen::Success)
    fail(ErrorCode::NumericalFailure, "Gram eigendecomposition did not converge");
  ++linalg_stats.eigendecompositions;

  EigenSystem es;
  es.eigenvalues = solver.eigenvalues();
  es.eigenvectors = solver.eigenvectors();
  es.n = n;

  // Rank-deficient Gram matrices (n < d) produce tiny negative eigenvalues;
  // clamping keeps the dual bracket lower bound -lambda_min/n well-defined.
  const double lmax = std::max(es.eigenvalues(es.eigenvalues.size() - 1), 0.0);
  const double floor = 1e-8 * lmax;
  for (Index i = 0; i < es.eigenvalues.size(); ++i)
    if (es.eigenvalues(i) < floor) es.eigenvalues(i) = 0.0;
  return es;
}

}  // namespace detail

inline EigenSystem gram_eigendecomposition(const FeatureMatrix& X) {
  if (!X.centered)
    fail(ErrorCode::InvalidData, "Gram eigendecomposition expects centered data");
  return detail::eigensystem_of_gram(X.data, X.n());
}

/**
 * Applies (X'X + n*nu*I)^{-1} to y through the precomputed eigensystem:
 * U diag(1/(lambda_j + n*nu)) U' y. All shifted eigenvalues must stay
 * strictly positive.
 */
inline Vector apply_regularized_inverse(const EigenSystem& es, double nu, const Vector& y) {
  if (y.size() != es.eigenvalues.size())
    fail(ErrorCode::InvalidInput, "vector length does not match the eigensystem");
  const double shift = static_cast<double>(es.n) * nu;
  Vector w = es.eigenvectors.transpose() * y;
  for (Index j = 0; j < w.size(); ++j) {
    const double denom = es.eigenvalues(j) + shift;
    if (denom <= 0.0)
      fail(ErrorCode::SingularRegularization,
           "shifted eigenvalue " + std::to_string(denom) + " is not positive");
    w(j) /= denom;
  }
  return es.eigenvectors * w;
}

/**
 * Top eigenvectors of X'X by descending eigenvalue. Returns the d x target_dim
 * projection (columns orthonormal, sign fixed so the largest-magnitude entry
 * is positive) and the matching descending eigenvalues.
 */
inline std::pair<Matrix, Vector> pca_fit(const FeatureMatrix& X, Index target_dim) {
  const Index d = X.dim();
  if (target_dim < 1 || target_dim > d)
    fail(ErrorCode::InvalidConfig,
         "target_dim " + std::to_string(target_dim) + " out of range [1, " +
             std::to_string(d) + "]");
  const EigenSystem es = detail::eigensystem_of_gram(X.data, X.n());

  Matrix projection(d, target_dim);
  Vector eigvals_desc(target_dim);
  for (Index c = 0; c < target_dim; ++c) {
    const Index src = d - 1 - c;  // ascending storage, walk from the top
    Vector v = es.eigenvectors.col(src);
    Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0.0) v = -v;
    projection.col(c) = v;
    eigvals_desc(c) = es.eigenvalues(src);
  }
  return {std::move(projection), std::move(eigvals_desc)};
}

/// All d eigenvalues of X'X, descending. Convenience for the scale pipeline.
inline Vector gram_eigenvalues_desc(const FeatureMatrix& X) {
  const EigenSystem es = detail::eigensystem_of_gram(X.data, X.n());
  return es.eigenvalues.reverse();
}

}  // namespace scq
