#include "bintopk/recall.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace bintopk {

namespace {

void check_k(std::int64_t k) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
}

void check_target(double r) {
  if (!(r > 0.0) || !(r < 1.0)) {
    throw std::invalid_argument("recall_target must lie in (0,1)");
  }
}

long double expected_recall_ld(std::int64_t k, std::int64_t bins) {
  if (k == 1) return 1.0L;
  if (bins == 1) return 0.0L;
  const long double p = static_cast<long double>(bins - 1) / static_cast<long double>(bins);
  return std::pow(p, static_cast<long double>(k - 1));
}

// ceil that forgives sub-1e-9 relative overshoot. The closed forms below
// divide by quantities like 1-0.95 whose double representation is off by one
// ulp, which would otherwise bump an exact integer result to the next one.
std::int64_t ceil_snapped(long double x) {
  const long double nearest = std::round(x);
  const long double tol = 1e-9L * std::max(1.0L, std::fabs(x));
  if (std::fabs(x - nearest) <= tol) return static_cast<std::int64_t>(nearest);
  return static_cast<std::int64_t>(std::ceil(x));
}

}  // namespace

double expected_recall(std::int64_t k, std::int64_t bins) {
  check_k(k);
  if (bins < 1) throw std::invalid_argument("bins must be at least 1");
  return static_cast<double>(expected_recall_ld(k, bins));
}

std::int64_t min_bins(std::int64_t k, double recall_target) {
  check_k(k);
  check_target(recall_target);
  if (k == 1) return 1;
  // Closed-form inverse of ((L-1)/L)^(k-1) >= r, then local adjustment until
  // the result is the exact inverse of the double-precision expected_recall.
  // "Reaches the target" must be decided on the double rounding of the model,
  // not on the wider intermediate, or min_bins overshoots by one whenever the
  // rounded value lands exactly on recall_target (e.g. k=2, r=0.8).
  const auto meets = [k, recall_target](std::int64_t bins) {
    return static_cast<double>(expected_recall_ld(k, bins)) >= recall_target;
  };
  const long double root =
      std::pow(static_cast<long double>(recall_target), 1.0L / static_cast<long double>(k - 1));
  std::int64_t l = std::max<std::int64_t>(ceil_snapped(1.0L / (1.0L - root)), 2);
  while (l > 2 && meets(l - 1)) --l;
  while (!meets(l)) ++l;
  return l;
}

std::int64_t approx_min_bins(std::int64_t k, double recall_target) {
  check_k(k);
  check_target(recall_target);
  if (k == 1) return 1;
  const long double x =
      static_cast<long double>(k - 1) / (1.0L - static_cast<long double>(recall_target));
  return std::max<std::int64_t>(ceil_snapped(x), 1);
}

BinPlan plan_bins(std::int64_t database_size, std::int64_t k, double recall_target,
                  std::int64_t size_override) {
  check_k(k);
  if (database_size < 1) throw std::invalid_argument("database_size must be at least 1");
  if (k > database_size) throw std::invalid_argument("k cannot exceed database_size");
  if (!(recall_target > 0.0) || !(recall_target <= 1.0)) {
    throw std::invalid_argument("recall_target must lie in (0,1]");
  }
  const std::int64_t n_eff = size_override > 0 ? size_override : database_size;
  if (k > n_eff) throw std::invalid_argument("k cannot exceed the planning size");

  const auto bins_for = [n_eff](std::uint32_t w) {
    const std::int64_t width = std::int64_t{1} << w;
    return (n_eff + width - 1) / width;
  };

  BinPlan plan;
  plan.database_size = n_eff;
  plan.k = k;
  plan.recall_target = recall_target;

  std::int64_t required = n_eff;  // W=0 fallback: exact search
  if (recall_target < 1.0) {
    required = std::max(min_bins(k, recall_target), k);
  }
  if (required >= n_eff) {
    plan.bin_width_exp = 0;
    plan.num_bins = n_eff;
    return plan;
  }

  // Widest bin that still leaves at least `required` bins. Capped at the
  // width that swallows the whole database in a single bin.
  const std::uint32_t w_cap =
      static_cast<std::uint32_t>(std::bit_width(static_cast<std::uint64_t>(n_eff - 1)));
  std::uint32_t w = 0;
  while (w < w_cap && bins_for(w + 1) >= required) ++w;
  plan.bin_width_exp = w;
  plan.num_bins = bins_for(w);
  return plan;
}

RecallEstimate simulate_recall(std::int64_t k, std::int64_t bins, std::int64_t trials,
                               std::uint64_t seed) {
  check_k(k);
  if (bins < 1) throw std::invalid_argument("bins must be at least 1");
  if (trials < 1) throw std::invalid_argument("trials must be at least 1");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> pick(0, bins - 1);
  std::vector<std::int64_t> slots(static_cast<std::size_t>(k));

  double sum = 0.0;
  double sumsq = 0.0;
  for (std::int64_t t = 0; t < trials; ++t) {
    for (auto& s : slots) s = pick(rng);
    std::sort(slots.begin(), slots.end());
    std::int64_t alone = 0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const bool prev_same = i > 0 && slots[i - 1] == slots[i];
      const bool next_same = i + 1 < slots.size() && slots[i + 1] == slots[i];
      if (!prev_same && !next_same) ++alone;
    }
    const double recall = static_cast<double>(alone) / static_cast<double>(k);
    sum += recall;
    sumsq += recall * recall;
  }

  RecallEstimate est;
  est.trials = trials;
  est.expected = sum / static_cast<double>(trials);
  est.z_mean = est.expected * static_cast<double>(k);
  const double var = std::max(0.0, sumsq / static_cast<double>(trials) - est.expected * est.expected);
  est.std_error = trials > 1 ? std::sqrt(var / static_cast<double>(trials - 1)) : 0.0;
  return est;
}

}  // namespace bintopk
