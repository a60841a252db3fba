#include "bintopk/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "bintopk/dataio.hpp"
#include "bintopk/recall.hpp"
#include "parallel.hpp"

#if defined(__AVX2__)
#include <immintrin.h>
#endif

namespace bintopk {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t mid = xs.size() / 2;
  return xs.size() % 2 == 1 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
}

DenseMatrix copy_rows(const DenseMatrix& m, std::int64_t begin, std::int64_t end) {
  DenseMatrix out(end - begin, m.cols());
  std::memcpy(out.row(0), m.row(begin),
              static_cast<std::size_t>((end - begin) * m.cols()) * sizeof(float));
  return out;
}

// One full search over the query set, honoring the batch size.
TopKResult run_search(const DenseMatrix& queries, const DenseMatrix& database, Metric metric,
                      const SearchOptions& options, std::int64_t batch) {
  const std::int64_t m = queries.rows();
  if (batch <= 0 || batch >= m) {
    return std::get<TopKResult>(search(queries, database, metric, options));
  }
  TopKResult out;
  out.values = DenseMatrix(m, options.k);
  out.indices = IndexMatrix(m, options.k);
  for (std::int64_t begin = 0; begin < m; begin += batch) {
    const std::int64_t end = std::min(begin + batch, m);
    const DenseMatrix slice = copy_rows(queries, begin, end);
    TopKResult part = std::get<TopKResult>(search(slice, database, metric, options));
    out.direction = part.direction;
    std::memcpy(out.values.row(begin), part.values.row(0),
                static_cast<std::size_t>((end - begin) * options.k) * sizeof(float));
    std::memcpy(out.indices.row(begin), part.indices.row(0),
                static_cast<std::size_t>((end - begin) * options.k) * sizeof(std::int32_t));
  }
  return out;
}

std::string format_csv_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

#if defined(__AVX2__)

// Max+argmax scan with the same compare/blend pattern as the kernel's
// reduction: 3 coefficient-wise ops per element.
void scan_max_argmax(const float* v, std::int64_t n, float& best, std::int32_t& arg) {
  __m256 bv = _mm256_set1_ps(-std::numeric_limits<float>::infinity());
  __m256i bi = _mm256_set1_epi32(-1);
  __m256i jv = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);
  const __m256i step = _mm256_set1_epi32(8);
  std::int64_t j = 0;
  for (; j + 8 <= n; j += 8) {
    const __m256 yv = _mm256_loadu_ps(v + j);
    const __m256 m = _mm256_cmp_ps(yv, bv, _CMP_GT_OQ);
    bv = _mm256_blendv_ps(bv, yv, m);
    bi = _mm256_blendv_epi8(bi, jv, _mm256_castps_si256(m));
    jv = _mm256_add_epi32(jv, step);
  }
  alignas(32) float lane_v[8];
  alignas(32) std::int32_t lane_i[8];
  _mm256_store_ps(lane_v, bv);
  _mm256_store_si256(reinterpret_cast<__m256i*>(lane_i), bi);
  best = lane_v[0];
  arg = lane_i[0];
  for (int t = 1; t < 8; ++t) {
    if (lane_v[t] > best) {
      best = lane_v[t];
      arg = lane_i[t];
    }
  }
  for (; j < n; ++j) {
    if (v[j] > best) {
      best = v[j];
      arg = static_cast<std::int32_t>(j);
    }
  }
}

#else

void scan_max_argmax(const float* v, std::int64_t n, float& best, std::int32_t& arg) {
  best = -std::numeric_limits<float>::infinity();
  arg = -1;
  for (std::int64_t j = 0; j < n; ++j) {
    if (v[j] > best) {
      best = v[j];
      arg = static_cast<std::int32_t>(j);
    }
  }
}

#endif  // __AVX2__

}  // namespace

std::vector<BenchPoint> bench_sweep(const DenseMatrix& queries, const DenseMatrix& database,
                                    const IndexMatrix& truth, Metric metric,
                                    const BenchConfig& config) {
  if (truth.rows() != queries.rows()) {
    throw std::invalid_argument("bench_sweep: truth row count differs from queries");
  }
  if (truth.cols() < config.k) {
    throw std::invalid_argument("bench_sweep: truth has fewer than k columns");
  }
  if (config.recall_targets.empty()) {
    throw std::invalid_argument("bench_sweep: no recall targets");
  }

  const int warmup = std::max(config.warmup_runs, 3);
  const int timed = std::max(config.timed_runs, 5);
  const std::int64_t m = queries.rows();
  const double flops =
      static_cast<double>(count_flops(m, database.rows(), database.cols()));

  std::vector<BenchPoint> points;
  points.reserve(config.recall_targets.size());
  for (const double target : config.recall_targets) {
    SearchOptions options;
    options.k = config.k;
    options.recall_target = target;
    options.size_override = config.size_override;
    options.algo = config.algo;
    options.layout = config.layout;
    options.threads = config.threads;

    TopKResult result;
    for (int r = 0; r < warmup; ++r) {
      result = run_search(queries, database, metric, options, config.batch);
    }
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(timed));
    for (int r = 0; r < timed; ++r) {
      const auto start = Clock::now();
      result = run_search(queries, database, metric, options, config.batch);
      times.push_back(seconds_since(start));
    }
    const double sec = median(std::move(times));

    const BinPlan plan =
        plan_bins(database.rows(), config.k, target, config.size_override);
    BenchPoint point;
    point.recall_target = target;
    point.measured_recall = measure_recall(result.indices, truth, config.k).mean;
    point.qps = static_cast<double>(m) / sec;
    point.gflops = flops / sec / 1e9;
    point.l = plan.num_bins;
    point.w = plan.bin_width_exp;
    points.push_back(point);
  }
  return points;
}

void write_bench_csv(std::ostream& out, std::span<const BenchPoint> points) {
  out << "recall_target,measured_recall,qps,gflops,l,w\n";
  for (const BenchPoint& p : points) {
    out << format_csv_double(p.recall_target) << ',' << format_csv_double(p.measured_recall)
        << ',' << format_csv_double(p.qps) << ',' << format_csv_double(p.gflops) << ',' << p.l
        << ',' << p.w << '\n';
  }
}

void write_roofline_csv(std::ostream& out, std::span<const RooflineRow> rows) {
  out << "name,i_mem,i_cop,attainable_gflops,bound\n";
  for (const RooflineRow& r : rows) {
    out << r.name << ',' << format_csv_double(r.report.i_mem) << ','
        << format_csv_double(r.report.i_cop) << ','
        << format_csv_double(r.report.attainable / 1e9) << ',' << bound_name(r.report.bound)
        << '\n';
  }
}

BaselineResult baseline_full_sort(const DenseMatrix& queries, const DenseMatrix& database,
                                  Metric metric, std::int64_t k, std::size_t memory_limit_bytes,
                                  int threads) {
  if (k < 1 || k > database.rows()) {
    throw std::invalid_argument("baseline_full_sort: k must lie in [1, database rows]");
  }
  const std::size_t required = static_cast<std::size_t>(queries.rows()) *
                               static_cast<std::size_t>(database.rows()) * sizeof(float);
  if (required > memory_limit_bytes) {
    throw std::runtime_error("baseline_full_sort: score matrix needs " +
                             std::to_string(required) + " bytes, limit is " +
                             std::to_string(memory_limit_bytes));
  }

  const auto start = Clock::now();

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

  const DenseMatrix scores = score_matrix(*q, *x, metric, half_norms, std::nullopt, threads);

  const Direction dir = direction_of(metric);
  const std::int64_t n = database.rows();
  BaselineResult out;
  out.result.direction = dir;
  out.result.values = DenseMatrix(queries.rows(), k);
  out.result.indices = IndexMatrix(queries.rows(), k);
  detail::parallel_rows(queries.rows(), threads, [&](std::int64_t r0, std::int64_t r1) {
    std::vector<ScoredIndex> row(static_cast<std::size_t>(n));
    for (std::int64_t i = r0; i < r1; ++i) {
      const float* s = scores.row(i);
      for (std::int64_t j = 0; j < n; ++j) {
        row[static_cast<std::size_t>(j)] = {s[j], static_cast<std::int32_t>(j)};
      }
      std::sort(row.begin(), row.end(), [dir](const ScoredIndex& a, const ScoredIndex& b) {
        return orders_before(a, b, dir);
      });
      for (std::int64_t j = 0; j < k; ++j) {
        out.result.values.at(i, j) = row[static_cast<std::size_t>(j)].value;
        out.result.indices.at(i, j) = row[static_cast<std::size_t>(j)].index;
      }
    }
  });

  out.seconds = seconds_since(start);
  return out;
}

HardwareSpec calibrate_host(double seconds_per_probe) {
  if (!(seconds_per_probe > 0.0)) {
    throw std::invalid_argument("calibrate_host: probe budget must be positive");
  }
  HardwareSpec hw;
  hw.name = "host";

  // pi: the scoring microkernel on a cache-resident shape; best rep wins so
  // the figure is an (approximate) upper envelope of what searches can reach.
  {
    const DenseMatrix q = gen_synthetic(256, 128, SyntheticKind::kGaussian, 11);
    const DenseMatrix x = gen_synthetic(4096, 128, SyntheticKind::kGaussian, 12);
    const BinPlan plan = plan_bins(x.rows(), 1, 0.5);
    const double flops = static_cast<double>(count_flops(q.rows(), x.rows(), q.cols()));
    double best = 0.0;
    const auto budget = Clock::now();
    int reps = 0;
    while (reps < 3 || seconds_since(budget) < seconds_per_probe) {
      const auto start = Clock::now();
      const CandidateSet c = partial_reduce(q, x, Metric::kMips, plan, {}, std::nullopt, 1);
      const double sec = seconds_since(start);
      (void)c;
      best = std::max(best, flops / sec);
      ++reps;
    }
    hw.pi = best;
  }

  // beta: large copy, counting read+write bytes.
  {
    const std::size_t size = std::size_t{128} << 20;
    std::vector<char> src(size, 1);
    std::vector<char> dst(size, 0);
    double best = 0.0;
    const auto budget = Clock::now();
    int reps = 0;
    while (reps < 3 || seconds_since(budget) < seconds_per_probe) {
      const auto start = Clock::now();
      std::memcpy(dst.data(), src.data(), size);
      const double sec = seconds_since(start);
      if (dst[reps % static_cast<int>(size)] == 123) src[0] ^= 1;  // keep the copy observable
      best = std::max(best, 2.0 * static_cast<double>(size) / sec);
      ++reps;
    }
    hw.beta = best;
  }

  // gamma: compare + two selects per element over a cache-resident buffer.
  {
    const std::int64_t n = 1 << 18;
    DenseMatrix buf = gen_synthetic(1, n, SyntheticKind::kGaussian, 13);
    double best = 0.0;
    const auto budget = Clock::now();
    int reps = 0;
    float sink_v = 0.0f;
    std::int32_t sink_i = 0;
    while (reps < 3 || seconds_since(budget) < seconds_per_probe) {
      const auto start = Clock::now();
      const int passes = 64;
      for (int p = 0; p < passes; ++p) {
        scan_max_argmax(buf.row(0), n, sink_v, sink_i);
        buf.row(0)[static_cast<std::size_t>(sink_i)] = sink_v - 1.0f;  // vary the argmax
      }
      const double sec = seconds_since(start);
      best = std::max(best, 3.0 * static_cast<double>(n) * passes / sec);
      ++reps;
    }
    hw.gamma = best;
  }
  return hw;
}

}  // namespace bintopk
