#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "scq/config.hpp"
#include "scq/linalg.hpp"

namespace scq {

enum class Method { OnE, OgE, ITQ };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::OnE: return "one";
    case Method::OgE: return "oge";
    case Method::ITQ: return "itq";
  }
  fail(ErrorCode::InvalidInput, "unknown method");
}

/// Orthonormal for the unit-column trainers and the rotation baseline;
/// orthogonal (free norms) for the penalized trainer.
inline ProjectionKind projection_kind_of(Method m) {
  return m == Method::OgE ? ProjectionKind::Orthogonal : ProjectionKind::Orthonormal;
}

/**
 * Everything needed to hash new samples: codes = sign((x - mean) [pca] s V).
 * `pca` is the optional pre-reduction applied before projection; without it V
 * acts on the centered features directly. `hyper` records the training
 * configuration for provenance and reproduction.
 */
struct HashModel {
  Method method = Method::OnE;
  Index L = 0;
  Index d_in = 0;  // raw feature dimension, before centering or reduction
  Vector mean;
  std::optional<Matrix> pca;  // d_in x D, orthonormal columns
  double scale = 1.0;
  ProjectionMatrix V;  // D x L (d_in x L without pca)
  TrainConfig hyper;
  std::uint32_t format_version = 1;
};

/**
 * Structural and numeric consistency of a model, applied after training and
 * after deserialization. Everything wrong with a model that parsed cleanly is
 * a CorruptModel: dimension mismatches, a projection that fails its kind's
 * orthogonality tolerance, a non-positive scale.
 */
inline void validate_model(const HashModel& m) {
  const auto bad = [](const std::string& why) {
    fail(ErrorCode::CorruptModel, "model is inconsistent: " + why);
  };
  if (m.L < 1) bad("code length " + std::to_string(m.L));
  if (m.d_in < 1) bad("input dimension " + std::to_string(m.d_in));
  if (m.mean.size() != m.d_in) bad("mean length does not match input dimension");
  if (!(m.scale > 0.0)) bad("scale must be positive");
  Index proj_in = m.d_in;
  if (m.pca) {
    if (m.pca->rows() != m.d_in) bad("reduction rows do not match input dimension");
    if (m.pca->cols() < 1 || m.pca->cols() > m.d_in) bad("reduction width out of range");
    proj_in = m.pca->cols();
  }
  if (m.V.data.rows() != proj_in) bad("projection rows do not match its input");
  if (m.V.data.cols() != m.L) bad("projection columns do not match code length");
  if (m.V.kind != projection_kind_of(m.method)) bad("projection kind does not match method");
  std::string why;
  if (!check_projection(m.V, &why)) bad(why);
  if (!m.mean.allFinite() || !m.V.data.allFinite() || (m.pca && !m.pca->allFinite()))
    bad("non-finite entries");
}

}  // namespace scq
