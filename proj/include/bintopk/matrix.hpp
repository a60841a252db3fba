#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bintopk {

// Similarity used for scoring. Cosine is normalize-then-dot, so it shares the
// inner-product kernel path; Euclidean uses the rank-equivalent relaxed
// distance ||x||^2/2 - <q,x> and therefore searches for minima.
enum class Metric { kMips, kCosine, kEuclidean };

enum class Direction { kMax, kMin };

constexpr Direction direction_of(Metric m) noexcept {
  return m == Metric::kEuclidean ? Direction::kMin : Direction::kMax;
}

const char* metric_name(Metric m) noexcept;

// Row-major 2-D array of 32-bit floats. Rows hold data points or queries.
// A 0-row matrix is representable (it can fall out of reading an empty file
// with an explicit dimension); operations that need data reject it.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::int64_t rows, std::int64_t cols);
  DenseMatrix(std::int64_t rows, std::int64_t cols, std::vector<float> data);

  std::int64_t rows() const noexcept { return rows_; }
  std::int64_t cols() const noexcept { return cols_; }

  float* row(std::int64_t i) noexcept { return data_.data() + i * cols_; }
  const float* row(std::int64_t i) const noexcept { return data_.data() + i * cols_; }
  std::span<const float> row_span(std::int64_t i) const noexcept {
    return {row(i), static_cast<std::size_t>(cols_)};
  }

  float& at(std::int64_t i, std::int64_t j) noexcept { return data_[i * cols_ + j]; }
  float at(std::int64_t i, std::int64_t j) const noexcept { return data_[i * cols_ + j]; }

  std::vector<float>& data() noexcept { return data_; }
  const std::vector<float>& data() const noexcept { return data_; }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::int64_t rows_ = 0;
  std::int64_t cols_ = 0;
  std::vector<float> data_;
};

// Row-major 2-D array of 32-bit signed indices (matches the ivecs payload).
class IndexMatrix {
 public:
  IndexMatrix() = default;
  IndexMatrix(std::int64_t rows, std::int64_t cols);
  IndexMatrix(std::int64_t rows, std::int64_t cols, std::vector<std::int32_t> data);

  std::int64_t rows() const noexcept { return rows_; }
  std::int64_t cols() const noexcept { return cols_; }

  std::int32_t* row(std::int64_t i) noexcept { return data_.data() + i * cols_; }
  const std::int32_t* row(std::int64_t i) const noexcept { return data_.data() + i * cols_; }

  std::int32_t& at(std::int64_t i, std::int64_t j) noexcept { return data_[i * cols_ + j]; }
  std::int32_t at(std::int64_t i, std::int64_t j) const noexcept { return data_[i * cols_ + j]; }

  std::vector<std::int32_t>& data() noexcept { return data_; }
  const std::vector<std::int32_t>& data() const noexcept { return data_; }

  bool operator==(const IndexMatrix&) const = default;

 private:
  std::int64_t rows_ = 0;
  std::int64_t cols_ = 0;
  std::vector<std::int32_t> data_;
};

// One scored database row: element of a per-query result set.
struct ScoredIndex {
  float value = 0.0f;
  std::int32_t index = 0;
};

// Strict value compare. NaN never beats anything, so NaN-scored rows are
// never selected over an already-held value (the bin sentinel included).
inline bool beats(float a, float b, Direction dir) noexcept {
  return dir == Direction::kMax ? (a > b) : (a < b);
}

// Strict "a beats b". Equal values return false, so a reduction scanning
// indices in ascending order retains the earliest (smallest-index) element.
inline bool compare(const ScoredIndex& a, const ScoredIndex& b, Direction dir) noexcept {
  return beats(a.value, b.value, dir);
}

// Total order for full sorts (rescoring, ground truth): strict value first,
// ties to the smaller index. NaN ranks after every selectable value so sorts
// stay well defined on arbitrary inputs.
bool orders_before(const ScoredIndex& a, const ScoredIndex& b, Direction dir) noexcept;

// Dot product accumulated with fused multiply-add in ascending coordinate
// order. Every scoring path in the library uses this exact operation order,
// which is what makes exact-mode results bit-identical to the oracle.
float dot_fma(std::span<const float> a, std::span<const float> b) noexcept;

// MIPS/Cosine: <q,x>. Euclidean: half_norm - <q,x>, the rank-equivalent
// relaxed distance. half_norm must be supplied iff the metric is Euclidean.
float score(std::span<const float> q, std::span<const float> x, Metric metric,
            std::optional<float> half_norm = std::nullopt);

// L2-normalizes every row; zero rows are left untouched. Pre-pass for cosine.
DenseMatrix normalized_rows(const DenseMatrix& m);

float row_sumsq(std::span<const float> row) noexcept;

}  // namespace bintopk
