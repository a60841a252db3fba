#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bintopk/recall.hpp"
#include "doctest.h"

#if defined(BINTOPK_HAVE_MPFR)
#include <mpfr.h>
#endif

using namespace bintopk;

namespace {

// ---- Independent oracle ---------------------------------------------------
// expected_recall evaluated without the library's code path: 256-bit MPFR
// when available, long-double otherwise. min_bins is inverted by pure binary
// search over the oracle, never by the library's closed form.

#if defined(BINTOPK_HAVE_MPFR)

double oracle_expected_recall(std::int64_t k, std::int64_t bins) {
  if (k == 1) return 1.0;
  if (bins == 1) return 0.0;
  mpfr_t p, e;
  mpfr_init2(p, 256);
  mpfr_init2(e, 256);
  mpfr_set_si(p, static_cast<long>(bins - 1), MPFR_RNDN);
  mpfr_div_si(p, p, static_cast<long>(bins), MPFR_RNDN);
  mpfr_pow_si(e, p, static_cast<long>(k - 1), MPFR_RNDN);
  const double out = mpfr_get_d(e, MPFR_RNDN);
  mpfr_clear(p);
  mpfr_clear(e);
  return out;
}

// expected_recall(k, bins) >= r under the public model: the recall value is
// the double rounding of the exact quantity (min_bins is documented as the
// exact inverse of the double-precision expected_recall), so the comparison
// happens after MPFR's 256-bit result is rounded to double.
bool oracle_meets(std::int64_t k, std::int64_t bins, double r) {
  if (k == 1) return true;
  if (bins == 1) return false;
  mpfr_t p, e;
  mpfr_init2(p, 256);
  mpfr_init2(e, 256);
  mpfr_set_si(p, static_cast<long>(bins - 1), MPFR_RNDN);
  mpfr_div_si(p, p, static_cast<long>(bins), MPFR_RNDN);
  mpfr_pow_si(e, p, static_cast<long>(k - 1), MPFR_RNDN);
  const bool ok = mpfr_get_d(e, MPFR_RNDN) >= r;
  mpfr_clear(p);
  mpfr_clear(e);
  return ok;
}

#else

double oracle_expected_recall(std::int64_t k, std::int64_t bins) {
  if (k == 1) return 1.0;
  if (bins == 1) return 0.0;
  const long double p = static_cast<long double>(bins - 1) / static_cast<long double>(bins);
  return static_cast<double>(std::pow(p, static_cast<long double>(k - 1)));
}

bool oracle_meets(std::int64_t k, std::int64_t bins, double r) {
  if (k == 1) return true;
  if (bins == 1) return false;
  const long double p = static_cast<long double>(bins - 1) / static_cast<long double>(bins);
  // Same double rounding as the MPFR variant: the public model is double.
  return static_cast<double>(std::pow(p, static_cast<long double>(k - 1))) >= r;
}

#endif  // BINTOPK_HAVE_MPFR

std::int64_t oracle_min_bins(std::int64_t k, double r) {
  if (k == 1) return 1;
  std::int64_t lo = 1;  // never meets (r < 1)
  std::int64_t hi = 2;
  while (!oracle_meets(k, hi, r)) {
    lo = hi;
    hi *= 2;
  }
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (oracle_meets(k, mid, r)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace

TEST_CASE("expected_recall worked values") {
  CHECK(expected_recall(1, 1) == 1.0);
  CHECK(expected_recall(1, 999) == 1.0);
  CHECK(expected_recall(10, 1) == 0.0);
  CHECK(std::fabs(expected_recall(10, 100) - 0.913517) <= 1e-6);
  CHECK(std::fabs(expected_recall(10, 176) - 0.95001) <= 1e-5);
  CHECK(std::fabs(expected_recall(10, 176) - oracle_expected_recall(10, 176)) <= 1e-14);
  CHECK_THROWS_AS(expected_recall(0, 5), std::invalid_argument);
  CHECK_THROWS_AS(expected_recall(5, 0), std::invalid_argument);
}

TEST_CASE("expected_recall tracks the extended-precision oracle over a grid") {
  for (const std::int64_t k : {2, 3, 7, 10, 33, 100, 513, 1024}) {
    for (const std::int64_t l : {1, 2, 3, 10, 99, 176, 1024, 65536, 1 << 24}) {
      const double got = expected_recall(k, l);
      const double want = oracle_expected_recall(k, l);
      CHECK(std::fabs(got - want) <= 1e-12 * std::max(1.0, std::fabs(want)));
    }
  }
}

TEST_CASE("expected_recall monotonicity") {
  for (const std::int64_t k : {2, 5, 10, 64}) {
    double prev = -1.0;
    for (std::int64_t l = 1; l <= 4096; l = l * 2 + 1) {
      const double cur = expected_recall(k, l);
      CHECK(cur >= prev);
      prev = cur;
    }
  }
  for (const std::int64_t l : {2, 17, 176}) {
    double prev = 2.0;
    for (std::int64_t k = 1; k <= 512; k *= 2) {
      const double cur = expected_recall(k, l);
      CHECK(cur <= prev);
      prev = cur;
    }
  }
}

TEST_CASE("min_bins worked values against the oracle") {
  CHECK(min_bins(1, 0.99) == 1);
  CHECK(min_bins(10, 0.95) == 176);
  CHECK(oracle_min_bins(10, 0.95) == 176);
  CHECK(min_bins(10, 0.5) == 14);
  CHECK(oracle_min_bins(10, 0.5) == 14);
  CHECK(expected_recall(10, 13) < 0.5);
  CHECK(expected_recall(10, 14) >= 0.5);
  CHECK(min_bins(10, 0.99) == 896);
  CHECK(oracle_min_bins(10, 0.99) == 896);
  CHECK_THROWS_AS(min_bins(10, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(min_bins(10, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(min_bins(10, -0.5), std::invalid_argument);
  CHECK_THROWS_AS(min_bins(0, 0.5), std::invalid_argument);
}

TEST_CASE("min_bins inverts expected_recall exactly for k in 2..1024") {
  const double targets[] = {0.5, 0.8, 0.9, 0.95, 0.99};
  for (std::int64_t k = 2; k <= 1024; k = k < 16 ? k + 1 : k + 13) {
    for (const double r : targets) {
      const std::int64_t l = min_bins(k, r);
      CHECK(l == oracle_min_bins(k, r));
      CHECK(expected_recall(k, l) >= r);
      if (l > 1) CHECK(expected_recall(k, l - 1) < r);
    }
  }
}

TEST_CASE("approx_min_bins closed form and upper-bound property") {
  CHECK(approx_min_bins(10, 0.95) == 180);
  CHECK(approx_min_bins(2, 0.5) == 2);
  CHECK_THROWS_AS(approx_min_bins(10, 1.0), std::invalid_argument);
  for (std::int64_t k = 2; k <= 128; ++k) {
    for (const double r : {0.5, 0.9, 0.95, 0.99}) {
      CHECK(approx_min_bins(k, r) >= min_bins(k, r));
    }
  }
}

TEST_CASE("plan_bins worked examples") {
  const BinPlan sift = plan_bins(1000000, 10, 0.95);
  CHECK(sift.bin_width_exp == 12);
  CHECK(sift.num_bins == 245);
  CHECK(sift.database_size == 1000000);
  CHECK(sift.k == 10);
  CHECK(sift.recall_target == 0.95);

  const BinPlan tiny = plan_bins(100, 10, 0.99);
  CHECK(tiny.bin_width_exp == 0);
  CHECK(tiny.num_bins == 100);

  const BinPlan one = plan_bins(8, 1, 0.5);
  CHECK(one.bin_width_exp == 3);
  CHECK(one.num_bins == 1);

  const BinPlan exact = plan_bins(555, 3, 1.0);
  CHECK(exact.bin_width_exp == 0);
  CHECK(exact.num_bins == 555);

  // size_override plans for the full collection while this shard is smaller.
  const BinPlan shard = plan_bins(1000, 10, 0.95, 1000000);
  CHECK(shard.bin_width_exp == 12);
  CHECK(shard.num_bins == 245);
  CHECK(shard.database_size == 1000000);

  CHECK_THROWS_AS(plan_bins(5, 10, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(plan_bins(100, 10, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(plan_bins(100, 10, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(plan_bins(0, 1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(plan_bins(1000000, 10, 0.95, 5), std::invalid_argument);
}

TEST_CASE("plan_bins invariants over random shapes") {
  for (const std::int64_t n : {1, 2, 5, 100, 177, 4096, 65537, 1000000}) {
    for (const std::int64_t k : {1, 2, 10, 16}) {
      if (k > n) continue;
      for (const double r : {0.5, 0.9, 0.95, 0.99, 1.0}) {
        const BinPlan plan = plan_bins(n, k, r);
        const std::int64_t width = std::int64_t{1} << plan.bin_width_exp;
        CHECK(plan.num_bins == (n + width - 1) / width);     // L = ceil(N / 2^W)
        CHECK(plan.num_bins >= k);                           // enough candidates to rescore
        if (plan.bin_width_exp == 0) CHECK(plan.num_bins == n);  // exact mode
        if (r < 1.0 && n >= min_bins(k, r)) {
          CHECK(expected_recall(k, plan.num_bins) >= r);
          // Maximality: unless the whole database already fits one bin, one
          // more doubling of the bin width would drop below the bin floor.
          std::uint32_t w_cap = 0;
          while ((std::int64_t{1} << w_cap) < n) ++w_cap;
          if (plan.bin_width_exp < w_cap) {
            const std::int64_t wider = std::int64_t{1} << (plan.bin_width_exp + 1);
            const std::int64_t fewer = (n + wider - 1) / wider;
            CHECK(fewer < std::max(min_bins(k, r), k));
          }
        }
      }
    }
  }
}

TEST_CASE("simulate_recall statistics and determinism") {
  const RecallEstimate one = simulate_recall(1, 7, 1000, 42);
  CHECK(one.expected == 1.0);
  CHECK(one.z_mean == 1.0);

  const RecallEstimate collide = simulate_recall(10, 1, 500, 42);
  CHECK(collide.expected == 0.0);

  const RecallEstimate a = simulate_recall(10, 176, 100000, 42);
  const RecallEstimate b = simulate_recall(10, 176, 100000, 42);
  CHECK(a.expected == b.expected);  // deterministic for a fixed seed
  CHECK(a.z_mean == doctest::Approx(a.expected * 10.0));
  const double bound = 3.0 * (0.5 / std::sqrt(100000.0));
  CHECK(std::fabs(a.expected - expected_recall(10, 176)) <= bound);
  CHECK(a.std_error < 0.5 / std::sqrt(100000.0) + 1e-12);

  const RecallEstimate c = simulate_recall(10, 176, 100000, 43);
  CHECK(c.expected != a.expected);  // seed actually feeds the generator

  // Grid agreement within the same sampling bound.
  for (const std::int64_t k : {2, 5, 10}) {
    for (const std::int64_t l : {2, 14, 176, 1024}) {
      const RecallEstimate est = simulate_recall(k, l, 100000, 7);
      CHECK(std::fabs(est.expected - expected_recall(k, l)) <= bound);
    }
  }

  CHECK_THROWS_AS(simulate_recall(10, 176, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(simulate_recall(10, 0, 10, 1), std::invalid_argument);
}
