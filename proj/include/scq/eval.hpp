#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scq/codes.hpp"
#include "scq/model.hpp"

namespace scq {

/**
 * The hashing map of a model collapsed to centering plus one matrix: with
 * T = [pca] * s * V, codes are sign((x - mean) T), one subtraction and one
 * product per batch. Centering happens before the product so that an input
 * equal to the mean lands on exactly zero in every bit; folding the mean
 * into an offset instead would put cancellation after the product and
 * scatter such rows to either side by rounding noise. Rows whose pre-sign
 * magnitude dips under 1e-12 in any bit are reported through `flagged`:
 * their signs are arithmetically meaningless and the caller may want to
 * know.
 */
class FoldedEncoder {
 public:
  explicit FoldedEncoder(const HashModel& m) : mean_(m.mean) {
    validate_model(m);
    T_ = m.pca ? Matrix(*m.pca * m.V.data) : m.V.data;
    T_ *= m.scale;
  }

  BinaryCodes encode(const Matrix& raw, std::vector<Index>* flagged = nullptr) const {
    if (raw.cols() != T_.rows())
      fail(ErrorCode::InvalidInput,
           "feature dimension " + std::to_string(raw.cols()) + " does not match model (" +
               std::to_string(T_.rows()) + ")");
    if (!raw.allFinite())
      fail(ErrorCode::InvalidData, "input contains non-finite entries");
    Matrix U = (raw.rowwise() - mean_.transpose()) * T_;
    for (Index i = 0; i < U.rows(); ++i) {
      bool weak = false;
      for (Index j = 0; j < U.cols(); ++j) {
        if (U(i, j) > -1e-12 && U(i, j) < 1e-12) weak = true;
        U(i, j) = U(i, j) >= 0.0 ? 1.0 : -1.0;
      }
      if (weak && flagged) flagged->push_back(i);
    }
    return BinaryCodes::from_signs(std::move(U));
  }

  const Matrix& transform() const { return T_; }
  const Vector& mean() const { return mean_; }

 private:
  Matrix T_;
  Vector mean_;
};

inline BinaryCodes encode(const Matrix& raw, const HashModel& m,
                          std::vector<Index>* flagged = nullptr) {
  return FoldedEncoder(m).encode(raw, flagged);
}

struct EvalResult {
  double map = 0.0;
  double prec_at_r2 = 0.0;
  double prec_at_k = 0.0;
  Index k = 1000;
  std::vector<double> per_query_ap;
  std::vector<double> per_query_prec_r2;
  std::vector<double> per_query_prec_k;
};

namespace detail {

// Stable counting sort of database indices by Hamming distance: equal
// distances keep ascending index order, which is the tie rule everywhere.
inline void rank_by_distance(const BinaryCodes& db, const BinaryCodes& queries,
                             Index qi, std::vector<int>& dist,
                             std::vector<Index>& ranked) {
  const Index n = db.n();
  const Index L = db.L();
  dist.resize(static_cast<std::size_t>(n));
  ranked.resize(static_cast<std::size_t>(n));
  std::vector<Index> offset(static_cast<std::size_t>(L) + 2, 0);
  for (Index i = 0; i < n; ++i) {
    const int d = hamming_distance(db.row(i), queries.row(qi), L);
    dist[static_cast<std::size_t>(i)] = d;
    ++offset[static_cast<std::size_t>(d) + 1];
  }
  for (std::size_t d = 1; d < offset.size(); ++d) offset[d] += offset[d - 1];
  for (Index i = 0; i < n; ++i)
    ranked[static_cast<std::size_t>(offset[static_cast<std::size_t>(
        dist[static_cast<std::size_t>(i)])]++)] = i;
}

}  // namespace detail

/**
 * Full-ranking retrieval metrics in one pass per query. The database is
 * ranked by ascending Hamming distance with ties broken by ascending
 * database index. A query whose label never occurs in the database has
 * average precision zero; by default such queries still count toward the
 * mean (set include_zero_relevant = false to drop them from it). The
 * radius-2 and top-k precisions always average over every query.
 */
inline EvalResult evaluate_all(const BinaryCodes& db, const std::vector<int>& db_labels,
                               const BinaryCodes& queries,
                               const std::vector<int>& query_labels, Index k = 1000,
                               bool include_zero_relevant = true) {
  if (db.n() < 1) fail(ErrorCode::InvalidInput, "database is empty");
  if (queries.n() < 1) fail(ErrorCode::InvalidInput, "query set is empty");
  if (static_cast<Index>(db_labels.size()) != db.n() ||
      static_cast<Index>(query_labels.size()) != queries.n())
    fail(ErrorCode::InvalidInput, "label count does not match code count");
  if (db.L() != queries.L())
    fail(ErrorCode::InvalidInput, "database and query code lengths differ");
  if (k < 1) fail(ErrorCode::InvalidConfig, "k must be >= 1");

  std::unordered_map<int, Index> label_count;
  for (int lab : db_labels) ++label_count[lab];

  EvalResult res;
  res.k = k;
  const Index n = db.n();
  const Index top = std::min(k, n);
  double ap_sum = 0.0, r2_sum = 0.0, topk_sum = 0.0;
  Index ap_queries = 0;

  std::vector<int> dist;
  std::vector<Index> ranked;
  for (Index qi = 0; qi < queries.n(); ++qi) {
    detail::rank_by_distance(db, queries, qi, dist, ranked);
    const int want = query_labels[static_cast<std::size_t>(qi)];
    const auto found = label_count.find(want);
    const Index relevant_total = found == label_count.end() ? 0 : found->second;

    Index hits = 0, within_r2 = 0, r2_hits = 0, topk_hits = 0;
    double ap = 0.0;
    for (Index rank = 0; rank < n; ++rank) {
      const Index i = ranked[static_cast<std::size_t>(rank)];
      const bool rel = db_labels[static_cast<std::size_t>(i)] == want;
      if (rel) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
      }
      if (dist[static_cast<std::size_t>(i)] <= 2) {
        ++within_r2;
        if (rel) ++r2_hits;
      }
      if (rank < top && rel) ++topk_hits;
    }
    ap = relevant_total > 0 ? ap / static_cast<double>(relevant_total) : 0.0;
    const double r2 =
        within_r2 > 0 ? static_cast<double>(r2_hits) / static_cast<double>(within_r2) : 0.0;
    const double pk = static_cast<double>(topk_hits) / static_cast<double>(top);

    res.per_query_ap.push_back(ap);
    res.per_query_prec_r2.push_back(r2);
    res.per_query_prec_k.push_back(pk);
    if (relevant_total > 0 || include_zero_relevant) {
      ap_sum += ap;
      ++ap_queries;
    }
    r2_sum += r2;
    topk_sum += pk;
  }

  res.map = ap_queries > 0 ? ap_sum / static_cast<double>(ap_queries) : 0.0;
  res.prec_at_r2 = r2_sum / static_cast<double>(queries.n());
  res.prec_at_k = topk_sum / static_cast<double>(queries.n());
  return res;
}

inline double mean_average_precision(const BinaryCodes& db,
                                     const std::vector<int>& db_labels,
                                     const BinaryCodes& queries,
                                     const std::vector<int>& query_labels,
                                     bool include_zero_relevant = true) {
  return evaluate_all(db, db_labels, queries, query_labels, 1000, include_zero_relevant)
      .map;
}

inline double precision_at_radius2(const BinaryCodes& db,
                                   const std::vector<int>& db_labels,
                                   const BinaryCodes& queries,
                                   const std::vector<int>& query_labels) {
  return evaluate_all(db, db_labels, queries, query_labels).prec_at_r2;
}

inline double precision_at_k(const BinaryCodes& db, const std::vector<int>& db_labels,
                             const BinaryCodes& queries,
                             const std::vector<int>& query_labels, Index k = 1000) {
  return evaluate_all(db, db_labels, queries, query_labels, k).prec_at_k;
}

}  // namespace scq
