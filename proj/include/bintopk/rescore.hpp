#pragma once

#include <cstdint>
#include <optional>
#include <variant>

#include "bintopk/matrix.hpp"
#include "bintopk/recall.hpp"
#include "bintopk/reduce.hpp"

namespace bintopk {

// Exact per-query top-k. Rows are sorted best-first in `direction`, ties by
// ascending index; indices within a row are distinct and < N.
struct TopKResult {
  DenseMatrix values;   // queries x k
  IndexMatrix indices;  // queries x k
  Direction direction = Direction::kMax;
};

// Two interchangeable selection strategies: a bitonic sorting network
// (O(L log^2 L) compare-exchanges, data-independent schedule) and a bounded
// heap (O(L log k)). They agree bit-exactly; tests cross-check them.
enum class RescoreAlgo { kSelection, kBitonic };

// Exact top-k of each candidate row under the total order (value first, ties
// to the smaller index). Sentinel entries (index == database_rows) rank
// worst and are never selected; if fewer than k valid candidates exist in
// some row, the call fails.
TopKResult exact_rescore(const CandidateSet& candidates, std::int64_t k,
                         RescoreAlgo algo = RescoreAlgo::kSelection, int threads = 0);

struct SearchOptions {
  std::int64_t k = 10;
  double recall_target = 0.95;      // 1.0 selects exact mode (every row is a bin)
  bool aggregate = true;            // false returns the raw CandidateSet
  std::int64_t size_override = 0;   // plan for this many rows instead of x.rows()
  RescoreAlgo algo = RescoreAlgo::kSelection;
  std::optional<BlockLayout> layout;
  int threads = 0;
};

using SearchResult = std::variant<TopKResult, CandidateSet>;

// Full pipeline: plan_bins -> metric pre-pass (row normalization for cosine,
// half-norms for Euclidean) -> partial_reduce -> exact_rescore (when
// aggregate). aggregate=false exposes the M x L candidates for callers that
// merge shards themselves.
SearchResult search(const DenseMatrix& queries, const DenseMatrix& database, Metric metric,
                    const SearchOptions& options);

// Convenience wrapper for the common aggregate=true case.
TopKResult search_topk(const DenseMatrix& queries, const DenseMatrix& database, Metric metric,
                       std::int64_t k, double recall_target, int threads = 0);

}  // namespace bintopk
