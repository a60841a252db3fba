#include "bintopk/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace bintopk {

namespace {

void check_shape(std::int64_t rows, std::int64_t cols) {
  if (rows < 0) throw std::invalid_argument("matrix rows must be non-negative");
  if (cols < 1) throw std::invalid_argument("matrix cols must be positive");
}

}  // namespace

const char* metric_name(Metric m) noexcept {
  switch (m) {
    case Metric::kMips: return "mips";
    case Metric::kCosine: return "cosine";
    case Metric::kEuclidean: return "l2";
  }
  return "unknown";
}

DenseMatrix::DenseMatrix(std::int64_t rows, std::int64_t cols) : rows_(rows), cols_(cols) {
  check_shape(rows, cols);
  data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0f);
}

DenseMatrix::DenseMatrix(std::int64_t rows, std::int64_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  check_shape(rows, cols);
  if (data_.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw std::invalid_argument("matrix data size does not match rows*cols");
  }
}

IndexMatrix::IndexMatrix(std::int64_t rows, std::int64_t cols) : rows_(rows), cols_(cols) {
  check_shape(rows, cols);
  data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0);
}

IndexMatrix::IndexMatrix(std::int64_t rows, std::int64_t cols, std::vector<std::int32_t> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  check_shape(rows, cols);
  if (data_.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw std::invalid_argument("matrix data size does not match rows*cols");
  }
}

bool orders_before(const ScoredIndex& a, const ScoredIndex& b, Direction dir) noexcept {
  const bool a_nan = std::isnan(a.value);
  const bool b_nan = std::isnan(b.value);
  if (a_nan != b_nan) return b_nan;  // any number ranks before NaN
  if (!a_nan) {
    if (beats(a.value, b.value, dir)) return true;
    if (beats(b.value, a.value, dir)) return false;
  }
  return a.index < b.index;
}

float dot_fma(std::span<const float> a, std::span<const float> b) noexcept {
  float acc = 0.0f;
  for (std::size_t k = 0; k < a.size(); ++k) acc = std::fma(a[k], b[k], acc);
  return acc;
}

float score(std::span<const float> q, std::span<const float> x, Metric metric,
            std::optional<float> half_norm) {
  if (q.size() != x.size()) throw std::invalid_argument("score: dimension mismatch");
  if ((metric == Metric::kEuclidean) != half_norm.has_value()) {
    throw std::invalid_argument("score: half_norm is required exactly for the l2 metric");
  }
  const float dot = dot_fma(q, x);
  return metric == Metric::kEuclidean ? *half_norm - dot : dot;
}

float row_sumsq(std::span<const float> row) noexcept {
  float acc = 0.0f;
  for (const float v : row) acc = std::fma(v, v, acc);
  return acc;
}

DenseMatrix normalized_rows(const DenseMatrix& m) {
  DenseMatrix out(m.rows(), m.cols(), m.data());
  for (std::int64_t i = 0; i < m.rows(); ++i) {
    const float norm = std::sqrt(row_sumsq(m.row_span(i)));
    if (norm > 0.0f) {
      float* r = out.row(i);
      for (std::int64_t j = 0; j < m.cols(); ++j) r[j] /= norm;
    }
  }
  return out;
}

}  // namespace bintopk
