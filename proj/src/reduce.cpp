#include "bintopk/reduce.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "parallel.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define BINTOPK_REDUCE_AVX2 1
#endif

namespace bintopk {

namespace {

constexpr std::int64_t kRowTile = 4;  // query rows per microkernel pass

std::atomic<std::size_t> g_workspace_bytes{0};

template <Direction dir>
constexpr bool beats_t(float a, float b) noexcept {
  if constexpr (dir == Direction::kMax) {
    return a > b;
  } else {
    return a < b;
  }
}

constexpr float worst_value(Direction dir) noexcept {
  return dir == Direction::kMax ? -std::numeric_limits<float>::infinity()
                                : std::numeric_limits<float>::infinity();
}

// Copies database rows [jj, jj+jba) into coordinate-major order:
// kmaj[k*stride + j] = x(jj+j, k). Columns [jba, jpad) are zeroed so the
// vector kernel can run over a whole multiple of 16 columns; zero columns
// produce zero dot products that no reduction or copy ever reads.
void pack_tile(const DenseMatrix& x, std::int64_t jj, std::int64_t jba, std::int64_t jpad,
               std::int64_t stride, float* kmaj) {
  const std::int64_t d = x.cols();
  for (std::int64_t j = 0; j < jba; ++j) {
    const float* row = x.row(jj + j);
    float* col = kmaj + j;
    for (std::int64_t k = 0; k < d; ++k) col[k * stride] = row[k];
  }
  for (std::int64_t k = 0; k < d; ++k) {
    for (std::int64_t j = jba; j < jpad; ++j) kmaj[k * stride + j] = 0.0f;
  }
}

#if BINTOPK_REDUCE_AVX2

// y[u][0..jcols) = q[u] . x for four query rows against the packed tile.
// jcols is a multiple of 16. FMA lanes round exactly like std::fma, so these
// scores are bit-identical to the scalar scoring path.
void score_tile4(const float* q0, const float* q1, const float* q2, const float* q3,
                 std::int64_t d, const float* kmaj, std::int64_t stride, std::int64_t jcols,
                 float* y0, float* y1, float* y2, float* y3) {
  for (std::int64_t j = 0; j + 16 <= jcols; j += 16) {
    __m256 a00 = _mm256_setzero_ps(), a01 = _mm256_setzero_ps();
    __m256 a10 = _mm256_setzero_ps(), a11 = _mm256_setzero_ps();
    __m256 a20 = _mm256_setzero_ps(), a21 = _mm256_setzero_ps();
    __m256 a30 = _mm256_setzero_ps(), a31 = _mm256_setzero_ps();
    const float* xk = kmaj + j;
    for (std::int64_t k = 0; k < d; ++k, xk += stride) {
      const __m256 x0 = _mm256_loadu_ps(xk);
      const __m256 x1 = _mm256_loadu_ps(xk + 8);
      __m256 b = _mm256_set1_ps(q0[k]);
      a00 = _mm256_fmadd_ps(b, x0, a00);
      a01 = _mm256_fmadd_ps(b, x1, a01);
      b = _mm256_set1_ps(q1[k]);
      a10 = _mm256_fmadd_ps(b, x0, a10);
      a11 = _mm256_fmadd_ps(b, x1, a11);
      b = _mm256_set1_ps(q2[k]);
      a20 = _mm256_fmadd_ps(b, x0, a20);
      a21 = _mm256_fmadd_ps(b, x1, a21);
      b = _mm256_set1_ps(q3[k]);
      a30 = _mm256_fmadd_ps(b, x0, a30);
      a31 = _mm256_fmadd_ps(b, x1, a31);
    }
    _mm256_storeu_ps(y0 + j, a00);
    _mm256_storeu_ps(y0 + j + 8, a01);
    _mm256_storeu_ps(y1 + j, a10);
    _mm256_storeu_ps(y1 + j + 8, a11);
    _mm256_storeu_ps(y2 + j, a20);
    _mm256_storeu_ps(y2 + j + 8, a21);
    _mm256_storeu_ps(y3 + j, a30);
    _mm256_storeu_ps(y3 + j + 8, a31);
  }
}

#else

void score_tile4(const float* q0, const float* q1, const float* q2, const float* q3,
                 std::int64_t d, const float* kmaj, std::int64_t stride, std::int64_t jcols,
                 float* y0, float* y1, float* y2, float* y3) {
  for (std::int64_t j = 0; j < jcols; ++j) {
    float s0 = 0.0f, s1 = 0.0f, s2 = 0.0f, s3 = 0.0f;
    const float* xj = kmaj + j;
    for (std::int64_t k = 0; k < d; ++k) {
      const float xv = xj[k * stride];
      s0 = std::fma(q0[k], xv, s0);
      s1 = std::fma(q1[k], xv, s1);
      s2 = std::fma(q2[k], xv, s2);
      s3 = std::fma(q3[k], xv, s3);
    }
    y0[j] = s0;
    y1[j] = s1;
    y2[j] = s2;
    y3[j] = s3;
  }
}

#endif  // BINTOPK_REDUCE_AVX2

// Owns the per-worker scratch (packed tile + score rows) and produces score
// strips for blocks of query rows. Shared by the fused reduction and the
// materializing baseline so both score with identical arithmetic.
class TileScorer {
 public:
  TileScorer(const DenseMatrix& q, const DenseMatrix& x, bool euclid,
             std::span<const float> half_norms, std::int64_t db_block)
      : q_(q),
        x_(x),
        euclid_(euclid),
        half_norms_(half_norms),
        stride_((db_block + 15) & ~std::int64_t{15}),
        kmaj_(static_cast<std::size_t>(x.cols() * stride_)),
        ybuf_(static_cast<std::size_t>(kRowTile * stride_)) {
    g_workspace_bytes.fetch_add((kmaj_.size() + ybuf_.size()) * sizeof(float),
                                std::memory_order_relaxed);
  }

  void load_tile(std::int64_t jj, std::int64_t jba) {
    jj_ = jj;
    jba_ = jba;
    jpad_ = (jba + 15) & ~std::int64_t{15};
    pack_tile(x_, jj, jba, jpad_, stride_, kmaj_.data());
  }

  // Scores query rows [i0, i0+ur) against the loaded tile. Row u of the
  // result lives at row_scores(u); only columns [0, tile_rows()) are valid.
  void score_rows(std::int64_t i0, std::int64_t ur) {
    const float* q0 = q_.row(i0);
    const float* q1 = q_.row(ur > 1 ? i0 + 1 : i0);
    const float* q2 = q_.row(ur > 2 ? i0 + 2 : i0);
    const float* q3 = q_.row(ur > 3 ? i0 + 3 : i0);
    score_tile4(q0, q1, q2, q3, q_.cols(), kmaj_.data(), stride_, jpad_, ybuf_.data(),
                ybuf_.data() + stride_, ybuf_.data() + 2 * stride_, ybuf_.data() + 3 * stride_);
    if (euclid_) {
      const float* hn = half_norms_.data() + jj_;
      for (std::int64_t u = 0; u < ur; ++u) {
        float* y = ybuf_.data() + u * stride_;
        for (std::int64_t j = 0; j < jba_; ++j) y[j] = hn[j] - y[j];
      }
    }
#ifdef BINTOPK_VALIDATE_SCORES
    validate_sample(i0, ur);
#endif
  }

  const float* row_scores(std::int64_t u) const { return ybuf_.data() + u * stride_; }
  std::int64_t tile_begin() const { return jj_; }
  std::int64_t tile_rows() const { return jba_; }

 private:
#ifdef BINTOPK_VALIDATE_SCORES
  // Recomputes one score per scored row block in extended precision. The
  // 32-bit accumulation must stay within a coarse relative bound; a miss
  // means the kernel and the scalar contract have diverged.
  void validate_sample(std::int64_t i0, std::int64_t ur) const {
    const std::int64_t d = q_.cols();
    for (std::int64_t u = 0; u < ur; ++u) {
      const std::int64_t j = jj_ + (i0 + u) % jba_;
      const float* qrow = q_.row(i0 + u);
      const float* xrow = x_.row(j);
      long double acc = 0.0L;
      for (std::int64_t kk = 0; kk < d; ++kk) {
        acc += static_cast<long double>(qrow[kk]) * static_cast<long double>(xrow[kk]);
      }
      if (euclid_) acc = static_cast<long double>(half_norms_[j]) - acc;
      const long double got = row_scores(u)[j - jj_];
      const long double scale = std::max<long double>(1.0L, std::fabs(acc));
      if (std::fabs(got - acc) > 1e-3L * scale) {
        throw std::logic_error("score validation failed: fp32 accumulation diverged");
      }
    }
  }
#endif

  const DenseMatrix& q_;
  const DenseMatrix& x_;
  const bool euclid_;
  std::span<const float> half_norms_;
  std::int64_t stride_;
  std::vector<float> kmaj_;
  std::vector<float> ybuf_;
  std::int64_t jj_ = 0;
  std::int64_t jba_ = 0;
  std::int64_t jpad_ = 0;
};

// Folds one tile row of scores into the per-bin best/argbest arrays.
// Candidates are visited in ascending database order and only a strictly
// better value displaces the held one, so ties resolve to the smaller index
// and NaN (which wins no strict compare) is never selected.
template <Direction dir>
void reduce_row_scalar(const float* y, std::int64_t jj, std::int64_t jba, std::uint32_t w,
                       float* vrow, std::int32_t* arow) {
  for (std::int64_t j = 0; j < jba; ++j) {
    const std::int64_t g = jj + j;
    const std::int64_t l = g >> w;
    if (beats_t<dir>(y[j], vrow[l])) {
      vrow[l] = y[j];
      arow[l] = static_cast<std::int32_t>(g);
    }
  }
}

#if BINTOPK_REDUCE_AVX2

// Vector variant for bins of at least 8 rows. Each bin-aligned run is scanned
// 8 lanes at a time with a strict compare + two blends; the lane winners are
// then merged with the (value, smaller index) rule, which reproduces the
// ascending scalar scan exactly.
template <Direction dir>
void reduce_row_vector(const float* y, std::int64_t jj, std::int64_t jba, std::uint32_t w,
                       std::int32_t sentinel, float* vrow, std::int32_t* arow) {
  const std::int64_t width = std::int64_t{1} << w;
  const float init = worst_value(dir);
  std::int64_t rs = 0;
  while (rs < jba) {
    const std::int64_t offset = (jj + rs) & (width - 1);
    const std::int64_t re = std::min(jba, rs + (width - offset));
    const std::int64_t l = (jj + rs) >> w;

    float best_v = init;
    std::int64_t best_i = sentinel;

    const std::int64_t vec_end = rs + ((re - rs) & ~std::int64_t{7});
    if (vec_end > rs) {
      __m256 bv = _mm256_set1_ps(init);
      __m256i bi = _mm256_set1_epi32(sentinel);
      const std::int32_t base = static_cast<std::int32_t>(jj + rs);
      __m256i jv = _mm256_add_epi32(_mm256_set1_epi32(base),
                                    _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7));
      const __m256i step = _mm256_set1_epi32(8);
      for (std::int64_t j = rs; j < vec_end; j += 8) {
        const __m256 yv = _mm256_loadu_ps(y + j);
        const __m256 m = dir == Direction::kMax ? _mm256_cmp_ps(yv, bv, _CMP_GT_OQ)
                                                : _mm256_cmp_ps(yv, bv, _CMP_LT_OQ);
        bv = _mm256_blendv_ps(bv, yv, m);
        bi = _mm256_blendv_epi8(bi, jv, _mm256_castps_si256(m));
        jv = _mm256_add_epi32(jv, step);
      }
      alignas(32) float lane_v[8];
      alignas(32) std::int32_t lane_i[8];
      _mm256_store_ps(lane_v, bv);
      _mm256_store_si256(reinterpret_cast<__m256i*>(lane_i), bi);
      best_v = lane_v[0];
      best_i = lane_i[0];
      for (int t = 1; t < 8; ++t) {
        if (beats_t<dir>(lane_v[t], best_v) || (lane_v[t] == best_v && lane_i[t] < best_i)) {
          best_v = lane_v[t];
          best_i = lane_i[t];
        }
      }
    }
    for (std::int64_t j = vec_end; j < re; ++j) {
      if (beats_t<dir>(y[j], best_v)) {
        best_v = y[j];
        best_i = jj + j;
      }
    }
    if (beats_t<dir>(best_v, vrow[l])) {
      vrow[l] = best_v;
      arow[l] = static_cast<std::int32_t>(best_i);
    }
    rs = re;
  }
}

#endif  // BINTOPK_REDUCE_AVX2

template <Direction dir>
void reduce_row(const float* y, std::int64_t jj, std::int64_t jba, std::uint32_t w,
                std::int32_t sentinel, float* vrow, std::int32_t* arow) {
#if BINTOPK_REDUCE_AVX2
  if (w >= 3) {
    reduce_row_vector<dir>(y, jj, jba, w, sentinel, vrow, arow);
    return;
  }
#endif
  (void)sentinel;
  reduce_row_scalar<dir>(y, jj, jba, w, vrow, arow);
}

template <Direction dir>
void reduce_rows_worker(const DenseMatrix& q, const DenseMatrix& x, bool euclid,
                        std::span<const float> half_norms, const BlockLayout& layout,
                        std::uint32_t w, std::int32_t sentinel, DenseMatrix& values,
                        IndexMatrix& indices, std::int64_t row_begin, std::int64_t row_end) {
  const std::int64_t n = x.rows();
  const std::int64_t ib = layout.query_block;
  const std::int64_t jb = layout.db_block;
  TileScorer scorer(q, x, euclid, half_norms, jb);
  for (std::int64_t ii = row_begin; ii < row_end; ii += ib) {
    const std::int64_t ie = std::min(ii + ib, row_end);
    for (std::int64_t jj = 0; jj < n; jj += jb) {
      scorer.load_tile(jj, std::min(jb, n - jj));
      for (std::int64_t i0 = ii; i0 < ie; i0 += kRowTile) {
        const std::int64_t ur = std::min(kRowTile, ie - i0);
        scorer.score_rows(i0, ur);
        for (std::int64_t u = 0; u < ur; ++u) {
          reduce_row<dir>(scorer.row_scores(u), jj, scorer.tile_rows(), w, sentinel,
                          values.row(i0 + u), indices.row(i0 + u));
        }
      }
    }
  }
}

void check_layout(const BlockLayout& layout, std::uint32_t w) {
  if (layout.query_block < 1) throw std::invalid_argument("layout.query_block must be positive");
  if (layout.db_block < 1) throw std::invalid_argument("layout.db_block must be positive");
  const std::int64_t width = std::int64_t{1} << w;
  if (layout.db_block % width != 0 && width % layout.db_block != 0) {
    throw std::invalid_argument(
        "layout.db_block must divide the bin width 2^W or be a multiple of it");
  }
}

void check_scoring_inputs(const DenseMatrix& queries, const DenseMatrix& database, Metric metric,
                          std::span<const float> half_norms, const char* who) {
  if (queries.rows() < 1) throw std::invalid_argument(std::string(who) + ": no query rows");
  if (database.rows() < 1) throw std::invalid_argument(std::string(who) + ": no database rows");
  if (queries.cols() != database.cols()) {
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
  }
  if (database.rows() >= std::numeric_limits<std::int32_t>::max()) {
    throw std::invalid_argument(std::string(who) + ": database too large for 32-bit indices");
  }
  const bool euclid = metric == Metric::kEuclidean;
  if (euclid && std::ssize(half_norms) != database.rows()) {
    throw std::invalid_argument(std::string(who) +
                                ": half_norms must cover every database row");
  }
  if (!euclid && !half_norms.empty()) {
    throw std::invalid_argument(std::string(who) + ": half_norms are only valid for l2");
  }
}

}  // namespace

BlockLayout default_layout(std::int64_t queries, std::int64_t database_rows, std::int64_t dim,
                           std::uint32_t bin_width_exp) {
  (void)bin_width_exp;  // power-of-two db_block satisfies the rule for any W
  if (queries < 1 || database_rows < 1 || dim < 1) {
    throw std::invalid_argument("default_layout: sizes must be positive");
  }
  BlockLayout layout;
  // Re-streaming the database costs ~n*d/query_block words per query row, so
  // a block of a few hundred query rows keeps that term well below the
  // compulsory n*d stream while the packed tile stays cache resident.
  const std::int64_t d_pow2 = static_cast<std::int64_t>(
      std::bit_ceil(static_cast<std::uint64_t>(std::min<std::int64_t>(dim, 4096))));
  layout.query_block = std::min(queries, std::max<std::int64_t>(8, 2 * d_pow2));
  const std::int64_t tile_cols = std::max<std::int64_t>(16, 65536 / d_pow2);
  std::int64_t jb =
      static_cast<std::int64_t>(std::bit_floor(static_cast<std::uint64_t>(tile_cols)));
  jb = std::min(jb, std::int64_t{8192});
  jb = std::min(jb,
                static_cast<std::int64_t>(std::bit_ceil(static_cast<std::uint64_t>(database_rows))));
  layout.db_block = jb;
  return layout;
}

std::vector<float> precompute_half_norms(const DenseMatrix& database) {
  std::vector<float> out(static_cast<std::size_t>(database.rows()));
  for (std::int64_t i = 0; i < database.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = 0.5f * row_sumsq(database.row_span(i));
  }
  return out;
}

std::int64_t count_flops(std::int64_t m, std::int64_t n, std::int64_t d) {
  if (m < 1 || n < 1 || d < 1) throw std::invalid_argument("count_flops: sizes must be positive");
  std::int64_t acc = 0;
  if (__builtin_mul_overflow(m, n, &acc) || __builtin_mul_overflow(acc, d, &acc) ||
      __builtin_mul_overflow(acc, std::int64_t{2}, &acc)) {
    throw std::invalid_argument("count_flops: 2*m*n*d overflows int64");
  }
  return acc;
}

std::size_t last_reduce_workspace_bytes() noexcept {
  return g_workspace_bytes.load(std::memory_order_relaxed);
}

CandidateSet partial_reduce(const DenseMatrix& queries, const DenseMatrix& database,
                            Metric metric, const BinPlan& plan,
                            std::span<const float> half_norms,
                            std::optional<BlockLayout> layout, int threads) {
  check_scoring_inputs(queries, database, metric, half_norms, "partial_reduce");
  if (plan.database_size < database.rows()) {
    throw std::invalid_argument("partial_reduce: plan covers fewer rows than the database");
  }
  const std::int64_t width = std::int64_t{1} << plan.bin_width_exp;
  if (plan.num_bins != (plan.database_size + width - 1) / width) {
    throw std::invalid_argument("partial_reduce: plan bins inconsistent with database_size");
  }
  const BlockLayout used = layout.value_or(
      default_layout(queries.rows(), database.rows(), queries.cols(), plan.bin_width_exp));
  check_layout(used, plan.bin_width_exp);

  const Direction dir = direction_of(metric);
  const std::int32_t sentinel = static_cast<std::int32_t>(database.rows());
  const std::int64_t m = queries.rows();

  CandidateSet out;
  out.plan = plan;
  out.direction = dir;
  out.database_rows = database.rows();
  out.values =
      DenseMatrix(m, plan.num_bins,
                  std::vector<float>(static_cast<std::size_t>(m * plan.num_bins),
                                     worst_value(dir)));
  out.indices = IndexMatrix(
      m, plan.num_bins,
      std::vector<std::int32_t>(static_cast<std::size_t>(m * plan.num_bins), sentinel));

  g_workspace_bytes.store(0, std::memory_order_relaxed);
  const bool euclid = metric == Metric::kEuclidean;
  detail::parallel_rows(m, threads, [&](std::int64_t r0, std::int64_t r1) {
    if (dir == Direction::kMax) {
      reduce_rows_worker<Direction::kMax>(queries, database, euclid, half_norms, used,
                                          plan.bin_width_exp, sentinel, out.values, out.indices,
                                          r0, r1);
    } else {
      reduce_rows_worker<Direction::kMin>(queries, database, euclid, half_norms, used,
                                          plan.bin_width_exp, sentinel, out.values, out.indices,
                                          r0, r1);
    }
  });
  return out;
}

DenseMatrix score_matrix(const DenseMatrix& queries, const DenseMatrix& database, Metric metric,
                         std::span<const float> half_norms, std::optional<BlockLayout> layout,
                         int threads) {
  check_scoring_inputs(queries, database, metric, half_norms, "score_matrix");
  const BlockLayout used =
      layout.value_or(default_layout(queries.rows(), database.rows(), queries.cols(), 0));
  check_layout(used, 0);

  const std::int64_t m = queries.rows();
  const std::int64_t n = database.rows();
  DenseMatrix out(m, n);
  const bool euclid = metric == Metric::kEuclidean;
  detail::parallel_rows(m, threads, [&](std::int64_t r0, std::int64_t r1) {
    TileScorer scorer(queries, database, euclid, half_norms, used.db_block);
    for (std::int64_t ii = r0; ii < r1; ii += used.query_block) {
      const std::int64_t ie = std::min(ii + used.query_block, r1);
      for (std::int64_t jj = 0; jj < n; jj += used.db_block) {
        scorer.load_tile(jj, std::min(used.db_block, n - jj));
        for (std::int64_t i0 = ii; i0 < ie; i0 += kRowTile) {
          const std::int64_t ur = std::min(kRowTile, ie - i0);
          scorer.score_rows(i0, ur);
          for (std::int64_t u = 0; u < ur; ++u) {
            std::memcpy(out.row(i0 + u) + jj, scorer.row_scores(u),
                        static_cast<std::size_t>(scorer.tile_rows()) * sizeof(float));
          }
        }
      }
    }
  });
  return out;
}

}  // namespace bintopk
