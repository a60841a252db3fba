#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "bintopk/matrix.hpp"
#include "bintopk/oracle.hpp"
#include "bintopk/reduce.hpp"
#include "bintopk/rescore.hpp"
#include "bintopk/roofline.hpp"

namespace bintopk {

// One speed-recall measurement. gflops counts only the 2MND scoring
// multiply-adds, so approximate and exact points are directly comparable.
struct BenchPoint {
  double recall_target = 0.0;
  double measured_recall = 0.0;
  double qps = 0.0;
  double gflops = 0.0;
  std::int64_t l = 0;
  std::uint32_t w = 0;
};

struct BenchConfig {
  std::int64_t k = 10;
  std::vector<double> recall_targets;
  int warmup_runs = 3;  // floor; fewer is clamped up
  int timed_runs = 5;   // floor; QPS is the median
  std::int64_t batch = 0;  // queries per search call; 0 = all at once
  std::int64_t size_override = 0;
  RescoreAlgo algo = RescoreAlgo::kSelection;
  std::optional<BlockLayout> layout;
  int threads = 0;
};

// For each target: plan, warm up, time, and score against the cached truth.
// Results are deterministic apart from the timing columns (qps, gflops).
std::vector<BenchPoint> bench_sweep(const DenseMatrix& queries, const DenseMatrix& database,
                                    const IndexMatrix& truth, Metric metric,
                                    const BenchConfig& config);

// Header: recall_target,measured_recall,qps,gflops,l,w
void write_bench_csv(std::ostream& out, std::span<const BenchPoint> points);

struct RooflineRow {
  std::string name;
  RooflineReport report;
};

// Header: name,i_mem,i_cop,attainable_gflops,bound
void write_roofline_csv(std::ostream& out, std::span<const RooflineRow> rows);

struct BaselineResult {
  TopKResult result;
  double seconds = 0.0;
};

// The unfused comparison point: materialize the full m x n score matrix
// (same blocked scoring kernel), then per-row full sort and truncation.
// Refuses shapes whose score matrix would exceed memory_limit_bytes,
// reporting the required size.
BaselineResult baseline_full_sort(const DenseMatrix& queries, const DenseMatrix& database,
                                  Metric metric, std::int64_t k,
                                  std::size_t memory_limit_bytes = std::size_t{3} << 30,
                                  int threads = 0);

// Measured ceilings of this machine, in the hardware-spec units. Approximate
// by construction: pi comes from the scoring microkernel on a cache-resident
// shape, beta from a large memcpy, gamma from the compare+select scan.
HardwareSpec calibrate_host(double seconds_per_probe = 0.3);

}  // namespace bintopk
