#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "scq/codes.hpp"
#include "scq/config.hpp"
#include "scq/encoder_one.hpp"
#include "scq/linalg.hpp"

namespace scq {

enum class ScaleSource { Formula, MaxVar, Override };

struct ScaleParams {
  double s = 1.0;
  double s_max_var = 1.0;
  ScaleSource source = ScaleSource::Formula;
};

/**
 * The joint-compression working point s = sqrt(L / sum of the top L
 * eigenvalues), with eigenvalues given as per-sample variances (gram
 * eigenvalues over n). Scaling the data by c scales each variance by c^2 and
 * s by 1/c, so s * sqrt(sum/L) is invariant at 1.
 */
inline double compute_scale(const Vector& eigvals_desc, Index L) {
  if (L < 1 || L > eigvals_desc.size())
    fail(ErrorCode::InvalidConfig,
         "code length " + std::to_string(L) + " out of range [1, " +
             std::to_string(eigvals_desc.size()) + "]");
  const double sum = eigvals_desc.head(L).sum();
  if (!(sum > 0.0))
    fail(ErrorCode::DegenerateSpectrum,
         "top-" + std::to_string(L) + " eigenvalue sum " + std::to_string(sum) +
             " is not positive");
  return std::sqrt(static_cast<double>(L) / sum);
}

/// Largest scale keeping every sample inside the unit ball: 1 over the
/// largest row norm. Below this scale no sign target is clipped.
inline double compute_s_max_var(const FeatureMatrix& X) {
  double max_norm = 0.0;
  for (Index i = 0; i < X.n(); ++i)
    max_norm = std::max(max_norm, X.data.row(i).norm());
  if (max_norm == 0.0) fail(ErrorCode::DegenerateData, "all feature rows are zero");
  return 1.0 / max_norm;
}

/**
 * Variance captured by an orthonormal projection relative to the best
 * possible at the same width: ||XV||_F^2 over n times the top-L variance
 * sum (eigenvalues as per-sample variances, matching compute_scale). The
 * top-L principal basis scores 1 by definition.
 */
inline double retained_variance_fraction(const FeatureMatrix& X, const ProjectionMatrix& V,
                                         const Vector& eigvals_desc, Index L) {
  if (V.kind != ProjectionKind::Orthonormal)
    fail(ErrorCode::InvalidInput, "variance fraction needs an orthonormal projection");
  if (V.data.cols() != L)
    fail(ErrorCode::InvalidInput, "projection width does not match L");
  if (L < 1 || L > eigvals_desc.size())
    fail(ErrorCode::InvalidConfig,
         "code length " + std::to_string(L) + " out of range [1, " +
             std::to_string(eigvals_desc.size()) + "]");
  const double top = static_cast<double>(X.n()) * eigvals_desc.head(L).sum();
  if (!(top > 0.0))
    fail(ErrorCode::DegenerateSpectrum, "top eigenvalue sum is not positive");
  return (X.data * V.data).squaredNorm() / top;
}

struct SweepRow {
  double s = 0.0;
  double per_bit_loss = 0.0;
  double retained_fraction = 0.0;
  // |mean(|XV|) - 1| at the trained point. The flat-magnitude heuristic
  // behind the scale formula; reported for inspection, never asserted.
  double mean_gap = 0.0;
  std::string error;  // nonempty: training failed here and the row carries no numbers
};

/// Log-spaced scale grid from hi down to lo; a single point lands on the
/// geometric midpoint (with the default lo = s/8, hi = 8s span, that is the
/// formula scale itself).
inline std::vector<double> log_spaced_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi > 0.0) || lo > hi)
    fail(ErrorCode::InvalidConfig, "scale grid bounds must satisfy 0 < lo <= hi");
  if (points < 1) fail(ErrorCode::InvalidConfig, "scale grid needs at least one point");
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(points));
  if (points == 1) {
    grid.push_back(std::sqrt(lo * hi));
    return grid;
  }
  const double ratio = std::log(lo / hi) / static_cast<double>(points - 1);
  for (int i = 0; i < points; ++i) grid.push_back(hi * std::exp(ratio * i));
  return grid;
}

/**
 * Trains the orthonormal encoder once per scale and tabulates the loss and
 * variance trade-off, largest scale first. A failure at one point is
 * recorded in its row and the sweep moves on.
 */
inline std::vector<SweepRow> sweep_scale(const FeatureMatrix& X, Index L,
                                         std::vector<double> grid, TrainConfig cfg) {
  if (grid.empty()) fail(ErrorCode::InvalidConfig, "scale grid is empty");
  for (double s : grid)
    if (!(s > 0.0) || !std::isfinite(s))
      fail(ErrorCode::InvalidConfig, "scale grid values must be positive and finite");
  std::sort(grid.begin(), grid.end(), std::greater<>());
  cfg.L = L;

  const Vector variances = gram_eigenvalues_desc(X) / static_cast<double>(X.n());
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (double s : grid) {
    SweepRow row;
    row.s = s;
    try {
      const FeatureMatrix Xs = X.scaled(s);
      auto [V, trace] = train_one(Xs, cfg);
      row.per_bit_loss = trace.values.back() / static_cast<double>(L);
      row.retained_fraction = retained_variance_fraction(Xs, V, variances * s * s, L);
      row.mean_gap = std::abs((Xs.data * V.data).cwiseAbs().mean() - 1.0);
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace scq
