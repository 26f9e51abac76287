#pragma once

#include <optional>
#include <utility>

#include "scq/encoder_oge.hpp"
#include "scq/encoder_one.hpp"
#include "scq/itq.hpp"
#include "scq/model.hpp"
#include "scq/scale.hpp"

namespace scq {

struct FitOptions {
  Method method = Method::OnE;
  TrainConfig train;
  // Features are reduced to at most this many dimensions before training;
  // inputs already at or below it pass through untouched.
  Index pca_dim = 512;
  bool use_pca = true;
  int itq_iters = 50;
};

struct FitResult {
  HashModel model;
  LossTrace trace;
  double s_used = 1.0;
  double s_max_var = 1.0;
  ScaleSource scale_source = ScaleSource::Formula;
};

/**
 * The whole fit in one call: center, optionally reduce, resolve the scale,
 * train with the requested method, and assemble a model that hashes raw
 * inputs. The rotation baseline is scale-invariant (signs survive any s > 0),
 * so it always trains at s = 1; the joint trainers use the spectrum formula
 * unless an override is given.
 */
inline FitResult fit(const Matrix& raw, const FitOptions& opt) {
  if (opt.pca_dim < 1) fail(ErrorCode::InvalidConfig, "reduction width must be positive");
  auto [centered, mean] = zero_center(raw);

  std::optional<Matrix> axes;
  FeatureMatrix X = std::move(centered);
  if (opt.use_pca && X.dim() > opt.pca_dim) {
    axes = pca_fit(X, opt.pca_dim).first;
    X = FeatureMatrix{X.data * *axes, true, 1.0};
  }

  FitResult out;
  out.s_max_var = compute_s_max_var(X);

  HashModel m;
  if (opt.method == Method::ITQ) {
    if (opt.train.scale_override && !(*opt.train.scale_override > 0.0))
      fail(ErrorCode::InvalidConfig, "scale override must be positive");
    m = train_itq(X, opt.train.L, opt.itq_iters, opt.train.seed, &out.trace);
    if (opt.train.scale_override) {
      out.s_used = *opt.train.scale_override;
      out.scale_source = ScaleSource::Override;
    }
  } else {
    if (opt.train.scale_override) {
      out.s_used = *opt.train.scale_override;
      out.scale_source = ScaleSource::Override;
    } else {
      const Vector variances = gram_eigenvalues_desc(X) / static_cast<double>(X.n());
      out.s_used = compute_scale(variances, opt.train.L);
      out.scale_source = ScaleSource::Formula;
    }
    const FeatureMatrix Xs = X.scaled(out.s_used);
    auto [V, trace] =
        opt.method == Method::OnE ? train_one(Xs, opt.train) : train_oge(Xs, opt.train);
    m.method = opt.method;
    m.L = opt.train.L;
    m.V = std::move(V);
    out.trace = std::move(trace);
  }
  m.d_in = raw.cols();
  m.mean = std::move(mean);
  m.pca = std::move(axes);
  m.scale = out.s_used;
  m.hyper = opt.train;
  m.format_version = 1;
  validate_model(m);
  out.model = std::move(m);
  return out;
}

}  // namespace scq
