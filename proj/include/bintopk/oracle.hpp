#pragma once

#include <cstdint>
#include <vector>

#include "bintopk/matrix.hpp"
#include "bintopk/rescore.hpp"

namespace bintopk {

struct RecallScore {
  double value = 0.0;  // |result ∩ truth| / k
  std::int64_t k = 0;
};

struct RecallReport {
  std::vector<RecallScore> per_query;
  double mean = 0.0;
};

// Exact top-k per query via full scoring and full selection with the same
// comparator and fma accumulation as the kernel path. Ground truth for every
// test; intentionally independent of the fused kernel's code path.
TopKResult brute_force_topk(const DenseMatrix& queries, const DenseMatrix& database,
                            Metric metric, std::int64_t k, int threads = 0);

// Per-query |result ∩ truth| / k on index sets; values are ignored.
RecallReport measure_recall(const TopKResult& result, const TopKResult& truth);

// Same, with the first k columns of raw index matrices (e.g. cached truth
// read back from an ivecs file).
RecallReport measure_recall(const IndexMatrix& result, const IndexMatrix& truth, std::int64_t k);

}  // namespace bintopk
