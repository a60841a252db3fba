#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "bintopk/matrix.hpp"

namespace bintopk {

// One machine's ceilings: peak matrix-op throughput pi (FLOP/s), memory
// bandwidth beta (bytes/s), and coefficient-wise op throughput gamma (COP/s).
// COPs are the non-matrix vector instructions (compare, select, add) that
// the reduction spends per score.
struct HardwareSpec {
  std::string name;
  double pi = 0.0;     // FLOP/s
  double beta = 0.0;   // bytes/s
  double gamma = 0.0;  // COP/s
};

// Shape and accounting of one fused-search invocation. flops/bytes/cops are
// derived so the profile cannot drift out of sync with its fields.
struct KernelProfile {
  std::int64_t m = 0;   // queries
  std::int64_t n = 0;   // database rows
  std::int64_t d = 0;   // dimensions
  std::int64_t l = 0;   // bins
  std::int64_t ib = 0;  // query block rows
  std::int64_t c = 0;   // COPs spent per dot product
  double lambda = 1.0;  // fraction of the database actually scored

  double flops() const;  // lambda * 2*m*n*d
  double bytes() const;  // 4*(m*d + m*n*d/ib + 2*m*l)
  double cops() const;   // c*m*n
};

enum class Bound { kFlopPeak, kMemoryBandwidth, kCopBandwidth };

const char* bound_name(Bound b) noexcept;

struct RooflineReport {
  double attainable = 0.0;           // FLOP/s: min(pi, beta*i_mem, gamma*i_cop)
  Bound bound = Bound::kFlopPeak;    // which ceiling is lowest (ties in enum order)
  double i_mem = 0.0;                // FLOP/byte
  double i_cop = 0.0;                // FLOP/COP
  double runtime_lower_bound = 0.0;  // seconds; flops()/attainable when a profile is known
};

// min(pi, beta*i_mem, gamma*i_cop) with the bound labeled by fixed priority
// FlopPeak > MemoryBandwidth > CopBandwidth on ties. Infinite intensities
// express "this resource is not on the critical path".
RooflineReport attainable_performance(const HardwareSpec& hw, double i_mem, double i_cop);

// Dense scoring intensity when the full m x n score matrix is written:
// 2mnd / (4(mn + md + nd)), approaching d/2 for m,n >> d.
double blas3_intensity(std::int64_t m, std::int64_t n, std::int64_t d);

// Fused-reduction intensity: queries stream once (4md bytes), the database
// streams once per query block (4mnd/ib), and the two m x l outputs are
// written once (2*4ml). 2mnd / (4(md + mnd/ib + 2ml)).
double partial_reduce_mem_intensity(std::int64_t m, std::int64_t n, std::int64_t d,
                                    std::int64_t l, std::int64_t ib);

// FLOPs per coefficient-wise op: 2d/c (each score costs 2d FLOPs and c COPs).
double cop_intensity(std::int64_t d, std::int64_t c);

// Largest COP count per score that does not make the COP path the bottleneck:
// floor(2*d*gamma/pi).
std::int64_t cop_budget(std::int64_t d, const HardwareSpec& hw);

// COPs per score for this library's reduction: 3 (compare + two selects)
// + 1 when d is not a multiple of 128 (dot products need a masked tail)
// + 1 when n is not a power of two (the last bin is mask-padded)
// + 2 for Euclidean (relaxed-distance subtract + half-norm broadcast).
std::int64_t count_cops(Metric metric, std::int64_t d, std::int64_t n);

// Full diagnosis of a profile on a machine: both intensities, the attainable
// ceiling with its binding resource, and the runtime lower bound
// lambda*2mnd / attainable.
RooflineReport diagnose(const HardwareSpec& hw, const KernelProfile& profile);

// key=value serialization (one pair per line, '#' comments). Hardware specs
// use keys name, pi_tflops, beta_gbps, gamma_tcops; profiles use m, n, d, l,
// ib, c, lambda. Unknown, duplicate, or missing keys and unparsable numbers
// raise FormatError.
HardwareSpec parse_hardware_spec(const std::string& text, const std::string& origin = "");
KernelProfile parse_kernel_profile(const std::string& text, const std::string& origin = "");
HardwareSpec load_hardware_spec(const std::filesystem::path& path);
KernelProfile load_kernel_profile(const std::filesystem::path& path);
std::string format_hardware_spec(const HardwareSpec& hw);

}  // namespace bintopk
