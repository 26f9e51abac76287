#pragma once

#include <string>
#include <utility>

#include <Eigen/SVD>

#include "scq/codes.hpp"
#include "scq/config.hpp"
#include "scq/encoder_one.hpp"
#include "scq/model.hpp"

namespace scq {

/**
 * Orthogonal Procrustes step: the rotation minimizing ||B - P R||_F, from the
 * SVD P'B = S Omega Shat' as R = S Shat'.
 */
inline Matrix procrustes_rotation(const Matrix& B, const Matrix& P) {
  if (B.rows() != P.rows() || B.cols() != P.cols())
    fail(ErrorCode::InvalidInput, "code and projection shapes disagree");
  Eigen::JacobiSVD<Matrix> svd(P.transpose() * B,
                               Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success)
    fail(ErrorCode::NumericalFailure, "Procrustes SVD did not converge");
  return svd.matrixU() * svd.matrixV().transpose();
}

/**
 * Rotation baseline: project onto the top-L principal axes, then alternate
 * the shared sign step with a Procrustes rotation for a fixed number of
 * rounds. No scale is applied; the returned model hashes with the composed
 * orthonormal map (principal axes times rotation).
 *
 * The loss recorded per round is the quantization error in the projected
 * space after the rotation update, so each entry reflects both argmin steps.
 */
inline HashModel train_itq(const FeatureMatrix& X, Index L, int iters,
                           std::uint32_t seed, LossTrace* trace = nullptr) {
  if (!X.centered) fail(ErrorCode::InvalidData, "training data must be centered");
  if (iters < 1) fail(ErrorCode::InvalidConfig, "iteration count must be >= 1");
  const auto [axes, eigvals] = pca_fit(X, L);
  const FeatureMatrix P{X.data * axes, true, X.applied_scale};

  Matrix R = init_V(L, L, seed).data;
  if (trace) {
    trace->values.clear();
    trace->stop_reason = StopReason::MaxIter;  // fixed budget, no early stop
    trace->degenerate_columns = 0;
  }
  for (int t = 0; t < iters; ++t) {
    const BinaryCodes B = compute_B(P, ProjectionMatrix{R, ProjectionKind::Orthonormal});
    R = procrustes_rotation(B.codes, P.data);
    if (trace)
      trace->values.push_back(
          quantization_loss(B, P, ProjectionMatrix{R, ProjectionKind::Orthonormal}));
  }

  HashModel model;
  model.method = Method::ITQ;
  model.L = L;
  model.d_in = X.dim();
  model.mean = Vector::Zero(X.dim());
  model.scale = 1.0;
  model.V = ProjectionMatrix{axes * R, ProjectionKind::Orthonormal};
  model.hyper.L = L;
  model.hyper.max_iter = iters;
  model.hyper.seed = seed;
  return model;
}

}  // namespace scq
