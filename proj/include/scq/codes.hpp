#pragma once

#include "scq/linalg.hpp"

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace scq {

/**
 * Sign codes in two synchronized representations: the +-1 matrix the
 * trainers optimize against, and the packed bytes the search side wants.
 * Bit j of a row is (B_ij + 1) / 2, least-significant-bit first; the tail
 * of the last byte is zero.
 */
struct BinaryCodes {
  Matrix codes;
  std::vector<std::uint8_t> packed;

  Index n() const { return codes.rows(); }
  Index L() const { return codes.cols(); }
  Index row_bytes() const { return (codes.cols() + 7) / 8; }

  std::span<const std::uint8_t> row(Index i) const {
    return {packed.data() + i * row_bytes(), static_cast<std::size_t>(row_bytes())};
  }

  static BinaryCodes from_signs(Matrix signs) {
    BinaryCodes b;
    const Index n = signs.rows(), L = signs.cols();
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < L; ++j)
        if (signs(i, j) != 1.0 && signs(i, j) != -1.0)
          fail(ErrorCode::InvalidData,
               "code entry (" + std::to_string(i) + "," + std::to_string(j) +
                   ") is not +-1");
    b.codes = std::move(signs);
    const Index stride = (L + 7) / 8;
    b.packed.assign(static_cast<std::size_t>(n * stride), 0);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < L; ++j)
        if (b.codes(i, j) > 0.0)
          b.packed[static_cast<std::size_t>(i * stride + j / 8)] |=
              static_cast<std::uint8_t>(1u << (j % 8));
    return b;
  }

  static BinaryCodes from_packed(Index n, Index L, std::vector<std::uint8_t> bytes) {
    const Index stride = (L + 7) / 8;
    if (static_cast<Index>(bytes.size()) != n * stride)
      fail(ErrorCode::InvalidInput, "packed payload size does not match n and L");
    const std::uint8_t tail_mask =
        (L % 8) ? static_cast<std::uint8_t>(~((1u << (L % 8)) - 1u)) : 0;
    BinaryCodes b;
    b.codes.resize(n, L);
    for (Index i = 0; i < n; ++i) {
      if (tail_mask &&
          (bytes[static_cast<std::size_t>((i + 1) * stride - 1)] & tail_mask))
        fail(ErrorCode::FormatError,
             "nonzero padding bits in packed row " + std::to_string(i));
      for (Index j = 0; j < L; ++j)
        b.codes(i, j) =
            (bytes[static_cast<std::size_t>(i * stride + j / 8)] >> (j % 8)) & 1u
                ? 1.0
                : -1.0;
    }
    b.packed = std::move(bytes);
    return b;
  }
};

/// The optimal codes for a fixed projection: B = sign(XV), sign(0) = +1.
inline BinaryCodes compute_B(const FeatureMatrix& X, const ProjectionMatrix& V) {
  if (X.dim() != V.data.rows())
    fail(ErrorCode::InvalidInput, "feature dim does not match projection rows");
  Matrix U = X.data * V.data;
  for (Index i = 0; i < U.rows(); ++i)
    for (Index j = 0; j < U.cols(); ++j) U(i, j) = U(i, j) >= 0.0 ? 1.0 : -1.0;
  return BinaryCodes::from_signs(std::move(U));
}

/// (1/n) * ||B - XV||_F^2.
inline double quantization_loss(const BinaryCodes& B, const FeatureMatrix& X,
                                const ProjectionMatrix& V) {
  if (B.n() != X.n() || X.dim() != V.data.rows() || B.L() != V.data.cols())
    fail(ErrorCode::InvalidInput, "code/feature/projection dimensions disagree");
  return (B.codes - X.data * V.data).squaredNorm() / static_cast<double>(X.n());
}

inline double per_bit_loss(const BinaryCodes& B, const FeatureMatrix& X,
                           const ProjectionMatrix& V) {
  return quantization_loss(B, X, V) / static_cast<double>(B.L());
}

/// Differing bits among the first L; any junk past L is masked off.
inline int hamming_distance(std::span<const std::uint8_t> a,
                            std::span<const std::uint8_t> b, Index L) {
  const auto bytes = static_cast<std::size_t>((L + 7) / 8);
  if (a.size() != bytes || b.size() != bytes)
    fail(ErrorCode::InvalidInput, "packed code length does not match L");
  int dist = 0;
  for (std::size_t i = 0; i < bytes; ++i) {
    std::uint8_t x = a[i] ^ b[i];
    if (i + 1 == bytes && (L % 8)) x &= static_cast<std::uint8_t>((1u << (L % 8)) - 1u);
    dist += std::popcount(static_cast<unsigned>(x));
  }
  return dist;
}

}  // namespace scq
