#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scq/common.hpp"

namespace scq {

struct TrainConfig {
  Index L = 16;
  int max_iter = 100;
  double eps = 1e-4;    // outer stop: relative loss reduction
  double eps_b = 1e-4;  // nu bisection tolerance
  double eps_u = 1e-4;  // unit-norm tolerance of the inner alternation
  double mu = 0.02;     // norm penalty, orthogonal-encoder only
  std::optional<double> scale_override;
  std::uint32_t seed = 1;
};

enum class StopReason { Converged, MaxIter };

struct LossTrace {
  std::vector<double> values;
  StopReason stop_reason = StopReason::MaxIter;
  int degenerate_columns = 0;  // columns replaced by a random draw
};

namespace detail {

inline void check_train_config(const TrainConfig& cfg, Index d) {
  if (cfg.L < 1 || cfg.L > d)
    fail(ErrorCode::InvalidConfig,
         "code length " + std::to_string(cfg.L) + " out of range [1, " +
             std::to_string(d) + "]");
  if (cfg.max_iter < 1) fail(ErrorCode::InvalidConfig, "max_iter must be >= 1");
  if (!(cfg.eps > 0.0) || !(cfg.eps_b > 0.0) || !(cfg.eps_u > 0.0))
    fail(ErrorCode::InvalidConfig, "tolerances must be positive");
  if (cfg.mu < 0.0) fail(ErrorCode::InvalidConfig, "mu must be nonnegative");
  if (cfg.scale_override && !(*cfg.scale_override > 0.0))
    fail(ErrorCode::InvalidConfig, "scale override must be positive");
}

}  // namespace detail

}  // namespace scq
