#include "bintopk/oracle.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "bintopk/reduce.hpp"
#include "parallel.hpp"

namespace bintopk {

namespace {

void select_topk_row(const float* q, const DenseMatrix& x, Metric metric,
                     const std::vector<float>& half_norms, std::int64_t k, Direction dir,
                     float* out_v, std::int32_t* out_i) {
  const std::int64_t n = x.rows();
  const std::size_t d = static_cast<std::size_t>(x.cols());
  const auto cmp = [dir](const ScoredIndex& a, const ScoredIndex& b) {
    return orders_before(a, b, dir);
  };
  std::vector<ScoredIndex> heap;
  heap.reserve(static_cast<std::size_t>(k));
  for (std::int64_t j = 0; j < n; ++j) {
    const float dot = dot_fma({q, d}, {x.row(j), d});
    const float value =
        metric == Metric::kEuclidean ? half_norms[static_cast<std::size_t>(j)] - dot : dot;
    const ScoredIndex cand{value, static_cast<std::int32_t>(j)};
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

}  // namespace

TopKResult brute_force_topk(const DenseMatrix& queries, const DenseMatrix& database,
                            Metric metric, std::int64_t k, int threads) {
  if (queries.rows() < 1) throw std::invalid_argument("brute_force_topk: no query rows");
  if (database.rows() < 1) throw std::invalid_argument("brute_force_topk: no database rows");
  if (queries.cols() != database.cols()) {
    throw std::invalid_argument("brute_force_topk: dimension mismatch");
  }
  if (k < 1 || k > database.rows()) {
    throw std::invalid_argument("brute_force_topk: k must lie in [1, database rows]");
  }

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

  const Direction dir = direction_of(metric);
  TopKResult out;
  out.direction = dir;
  out.values = DenseMatrix(q->rows(), k);
  out.indices = IndexMatrix(q->rows(), k);
  detail::parallel_rows(q->rows(), threads, [&](std::int64_t r0, std::int64_t r1) {
    for (std::int64_t i = r0; i < r1; ++i) {
      select_topk_row(q->row(i), *x, metric, half_norms, k, dir, out.values.row(i),
                      out.indices.row(i));
    }
  });
  return out;
}

RecallReport measure_recall(const IndexMatrix& result, const IndexMatrix& truth, std::int64_t k) {
  if (result.rows() != truth.rows()) {
    throw std::invalid_argument("measure_recall: query counts differ");
  }
  if (k < 1 || k > result.cols() || k > truth.cols()) {
    throw std::invalid_argument("measure_recall: k exceeds the result columns");
  }
  RecallReport report;
  report.per_query.reserve(static_cast<std::size_t>(result.rows()));
  std::vector<std::int32_t> a(static_cast<std::size_t>(k));
  std::vector<std::int32_t> b(static_cast<std::size_t>(k));
  double sum = 0.0;
  for (std::int64_t i = 0; i < result.rows(); ++i) {
    a.assign(result.row(i), result.row(i) + k);
    b.assign(truth.row(i), truth.row(i) + k);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::int64_t common = 0;
    for (std::size_t ia = 0, ib = 0; ia < a.size() && ib < b.size();) {
      if (a[ia] < b[ib]) {
        ++ia;
      } else if (b[ib] < a[ia]) {
        ++ib;
      } else {
        ++common;
        ++ia;
        ++ib;
      }
    }
    const double value = static_cast<double>(common) / static_cast<double>(k);
    report.per_query.push_back({value, k});
    sum += value;
  }
  report.mean = sum / static_cast<double>(result.rows());
  return report;
}

RecallReport measure_recall(const TopKResult& result, const TopKResult& truth) {
  if (result.indices.cols() != truth.indices.cols()) {
    throw std::invalid_argument("measure_recall: k differs between result and truth");
  }
  return measure_recall(result.indices, truth.indices, result.indices.cols());
}

}  // namespace bintopk
