#include "bintopk/rescore.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "parallel.hpp"

namespace bintopk {

namespace {

// Pad element for the sorting network: NaN ranks after every selectable
// value under orders_before, and the huge index keeps pads stably last.
constexpr ScoredIndex kPad{std::numeric_limits<float>::quiet_NaN(),
                           std::numeric_limits<std::int32_t>::max()};

void select_row_heap(const float* values, const std::int32_t* indices, std::int64_t l,
                     std::int64_t k, Direction dir, float* out_v, std::int32_t* out_i) {
  // Binary heap with the worst kept element on top; a candidate enters only
  // if it orders before that element.
  std::vector<ScoredIndex> heap;
  heap.reserve(static_cast<std::size_t>(k));
  const auto cmp = [dir](const ScoredIndex& a, const ScoredIndex& b) {
    return orders_before(a, b, dir);
  };
  for (std::int64_t j = 0; j < l; ++j) {
    const ScoredIndex cand{values[j], indices[j]};
    if (std::ssize(heap) < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end(), cmp);
    } else if (orders_before(cand, heap.front(), dir)) {
      std::pop_heap(heap.begin(), heap.end(), cmp);
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end(), cmp);
    }
  }
  std::sort_heap(heap.begin(), heap.end(), cmp);
  for (std::int64_t j = 0; j < k; ++j) {
    out_v[j] = heap[static_cast<std::size_t>(j)].value;
    out_i[j] = heap[static_cast<std::size_t>(j)].index;
  }
}

void select_row_bitonic(const float* values, const std::int32_t* indices, std::int64_t l,
                        std::int64_t k, Direction dir, float* out_v, std::int32_t* out_i,
                        std::vector<ScoredIndex>& scratch) {
  const std::int64_t p = static_cast<std::int64_t>(std::bit_ceil(static_cast<std::uint64_t>(l)));
  scratch.assign(static_cast<std::size_t>(p), kPad);
  for (std::int64_t j = 0; j < l; ++j) scratch[static_cast<std::size_t>(j)] = {values[j], indices[j]};
  ScoredIndex* a = scratch.data();
  for (std::int64_t size = 2; size <= p; size <<= 1) {
    for (std::int64_t stride = size >> 1; stride > 0; stride >>= 1) {
      for (std::int64_t i = 0; i < p; ++i) {
        const std::int64_t partner = i ^ stride;
        if (partner <= i) continue;
        const bool ascending = (i & size) == 0;
        const bool misordered = ascending ? orders_before(a[partner], a[i], dir)
                                          : orders_before(a[i], a[partner], dir);
        if (misordered) std::swap(a[i], a[partner]);
      }
    }
  }
  for (std::int64_t j = 0; j < k; ++j) {
    out_v[j] = a[j].value;
    out_i[j] = a[j].index;
  }
}

}  // namespace

TopKResult exact_rescore(const CandidateSet& candidates, std::int64_t k, RescoreAlgo algo,
                         int threads) {
  const std::int64_t m = candidates.values.rows();
  const std::int64_t l = candidates.values.cols();
  if (k < 1) throw std::invalid_argument("exact_rescore: k must be at least 1");
  if (k > l) throw std::invalid_argument("exact_rescore: k exceeds the candidate count");
  if (candidates.indices.rows() != m || candidates.indices.cols() != l) {
    throw std::invalid_argument("exact_rescore: values/indices shape mismatch");
  }

  TopKResult out;
  out.direction = candidates.direction;
  out.values = DenseMatrix(m, k);
  out.indices = IndexMatrix(m, k);

  const std::int32_t sentinel = static_cast<std::int32_t>(candidates.database_rows);
  std::atomic<std::int64_t> bad_row{-1};
  detail::parallel_rows(m, threads, [&](std::int64_t r0, std::int64_t r1) {
    std::vector<ScoredIndex> scratch;
    for (std::int64_t i = r0; i < r1; ++i) {
      if (algo == RescoreAlgo::kBitonic) {
        select_row_bitonic(candidates.values.row(i), candidates.indices.row(i), l, k,
                           candidates.direction, out.values.row(i), out.indices.row(i), scratch);
      } else {
        select_row_heap(candidates.values.row(i), candidates.indices.row(i), l, k,
                        candidates.direction, out.values.row(i), out.indices.row(i));
      }
      for (std::int64_t j = 0; j < k; ++j) {
        if (out.indices.at(i, j) >= sentinel) {
          std::int64_t expected = -1;
          bad_row.compare_exchange_strong(expected, i);
          return;
        }
      }
    }
  });
  if (const std::int64_t row = bad_row.load(); row >= 0) {
    throw std::invalid_argument("exact_rescore: row " + std::to_string(row) +
                                " has fewer than k valid candidates");
  }
  return out;
}

SearchResult search(const DenseMatrix& queries, const DenseMatrix& database, Metric metric,
                    const SearchOptions& options) {
  if (options.k < 1) throw std::invalid_argument("search: k must be at least 1");
  if (options.k > database.rows()) {
    throw std::invalid_argument("search: k cannot exceed the database size");
  }
  const BinPlan plan =
      plan_bins(database.rows(), options.k, options.recall_target, options.size_override);

  const bool cosine = metric == Metric::kCosine;
  const DenseMatrix* q = &queries;
  const DenseMatrix* x = &database;
  DenseMatrix q_normalized;
  DenseMatrix x_normalized;
  if (cosine) {
    q_normalized = normalized_rows(queries);
    x_normalized = normalized_rows(database);
    q = &q_normalized;
    x = &x_normalized;
  }
  std::vector<float> half_norms;
  if (metric == Metric::kEuclidean) half_norms = precompute_half_norms(database);

  CandidateSet candidates =
      partial_reduce(*q, *x, metric, plan, half_norms, options.layout, options.threads);
  if (!options.aggregate) return candidates;
  return exact_rescore(candidates, options.k, options.algo, options.threads);
}

TopKResult search_topk(const DenseMatrix& queries, const DenseMatrix& database, Metric metric,
                       std::int64_t k, double recall_target, int threads) {
  SearchOptions options;
  options.k = k;
  options.recall_target = recall_target;
  options.threads = threads;
  return std::get<TopKResult>(search(queries, database, metric, options));
}

}  // namespace bintopk
