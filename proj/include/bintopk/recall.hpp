#pragma once

#include <cstdint>

namespace bintopk {

// How a database of database_size rows is carved into bins: bin l covers the
// contiguous index range [l * 2^bin_width_exp, (l+1) * 2^bin_width_exp), and
// num_bins = ceil(database_size / 2^bin_width_exp). bin_width_exp == 0 keeps
// one row per bin, which makes the reduction exact. k and recall_target
// record what the plan was built for.
struct BinPlan {
  std::uint32_t bin_width_exp = 0;  // W
  std::int64_t num_bins = 0;        // L
  std::int64_t database_size = 0;   // planning size the bins were sized for
  std::int64_t k = 0;
  double recall_target = 1.0;
};

struct RecallEstimate {
  double expected = 0.0;   // mean fraction of items alone in their bin
  double z_mean = 0.0;     // mean count of items alone; expected * k
  double std_error = 0.0;  // standard error of `expected` over trials
  std::int64_t trials = 0;
};

// Expected top-k recall when the k best rows land independently and uniformly
// in `bins` bins and a row survives only if no other of the k shares its bin:
// ((bins-1)/bins)^(k-1). Exact for k == 1.
double expected_recall(std::int64_t k, std::int64_t bins);

// Smallest bin count whose expected_recall reaches recall_target. Exact
// inverse of expected_recall, found from the closed form and then adjusted
// until minimality holds. recall_target must lie in (0,1).
std::int64_t min_bins(std::int64_t k, double recall_target);

// First-order approximation (k-1)/(1-recall_target), rounded up. Always an
// upper bound on min_bins since 1-r <= -ln(r^(1)) style slack only loosens it.
std::int64_t approx_min_bins(std::int64_t k, double recall_target);

// Chooses the widest power-of-two bin (largest W) whose bin count still meets
// recall_target, so the rescoring set is as small as the target allows.
// Falls back to W=0 (exact search) when the target cannot be met with fewer
// than database_size bins or when recall_target == 1. A positive
// size_override replaces database_size for planning (shards of a larger
// collection are scored against the full collection's plan).
BinPlan plan_bins(std::int64_t database_size, std::int64_t k, double recall_target,
                  std::int64_t size_override = 0);

// Monte Carlo of the collision model behind expected_recall: each trial
// throws k items into `bins` bins and counts the items that are alone.
RecallEstimate simulate_recall(std::int64_t k, std::int64_t bins, std::int64_t trials,
                               std::uint64_t seed);

}  // namespace bintopk
