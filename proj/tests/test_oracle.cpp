#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bintopk/dataio.hpp"
#include "bintopk/matrix.hpp"
#include "bintopk/oracle.hpp"
#include "doctest.h"

using namespace bintopk;

TEST_CASE("worked example: nearest neighbor under euclidean") {
  const DenseMatrix x(2, 2, {0.0f, 0.0f, 1.0f, 1.0f});
  const DenseMatrix q(1, 2, {0.1f, 0.1f});
  const TopKResult r = brute_force_topk(q, x, Metric::kEuclidean, 1);
  CHECK(r.indices.at(0, 0) == 0);
  CHECK(r.direction == Direction::kMin);
  // Relaxed scores ||x||^2/2 - <q,x>: row 0 gives 0 - 0 = 0, row 1 gives
  // 1 - 0.2 = 0.8; the zero row is nearer.
  CHECK(r.values.at(0, 0) == 0.0f);
}

TEST_CASE("worked example: inner-product ranking with ties") {
  const DenseMatrix q(1, 2, {1.0f, 0.0f});
  const DenseMatrix x(4, 2, {0.5f, 0.0f, 2.0f, 0.0f, -1.0f, 0.0f, 1.0f, 0.0f});
  const TopKResult r = brute_force_topk(q, x, Metric::kMips, 4);
  const float want_v[4] = {2.0f, 1.0f, 0.5f, -1.0f};
  const std::int32_t want_i[4] = {1, 3, 0, 2};
  for (int j = 0; j < 4; ++j) {
    CHECK(r.values.at(0, j) == want_v[j]);
    CHECK(r.indices.at(0, j) == want_i[j]);
  }
}

TEST_CASE("cosine normalizes rows, ties break to the smaller index") {
  // Three rows share direction (1,0): all score 1; the zero row scores 0.
  const DenseMatrix q(1, 2, {10.0f, 0.0f});
  const DenseMatrix x(5, 2,
                      {0.5f, 0.0f, 2.0f, 0.0f, -1.0f, 0.0f, 1.0f, 0.0f, 0.0f, 0.0f});
  const TopKResult r = brute_force_topk(q, x, Metric::kCosine, 5);
  const std::int32_t want_i[5] = {0, 1, 3, 4, 2};
  for (int j = 0; j < 5; ++j) CHECK(r.indices.at(0, j) == want_i[j]);
  CHECK(r.values.at(0, 0) == 1.0f);
  CHECK(r.values.at(0, 3) == 0.0f);
  CHECK(r.values.at(0, 4) == -1.0f);
}

TEST_CASE("row permutation maps the winners") {
  const std::int64_t n = 500;
  const std::int64_t d = 24;
  const DenseMatrix x = gen_synthetic(n, d, SyntheticKind::kGaussian, 5);
  const DenseMatrix q = gen_synthetic(4, d, SyntheticKind::kGaussian, 6);
  const std::vector<std::int32_t> perm = random_permutation(n, 7);
  const DenseMatrix xp = permute_rows(x, perm);

  const TopKResult base = brute_force_topk(q, x, Metric::kMips, 10);
  const TopKResult permuted = brute_force_topk(q, xp, Metric::kMips, 10);
  CHECK(base.values == permuted.values);
  for (std::int64_t i = 0; i < 4; ++i) {
    for (std::int64_t j = 0; j < 10; ++j) {
      CHECK(perm[static_cast<std::size_t>(permuted.indices.at(i, j))] == base.indices.at(i, j));
    }
  }
}

TEST_CASE("thread count never changes the oracle's output") {
  const DenseMatrix x = gen_synthetic(300, 17, SyntheticKind::kGaussian, 8);
  const DenseMatrix q = gen_synthetic(9, 17, SyntheticKind::kGaussian, 9);
  const TopKResult one = brute_force_topk(q, x, Metric::kEuclidean, 6, 1);
  for (const int threads : {2, 3, 8}) {
    const TopKResult many = brute_force_topk(q, x, Metric::kEuclidean, 6, threads);
    CHECK(one.values == many.values);
    CHECK(one.indices == many.indices);
  }
}

TEST_CASE("brute force argument validation") {
  const DenseMatrix q(1, 2, {1.0f, 0.0f});
  const DenseMatrix x(4, 2, {0.5f, 0.0f, 2.0f, 0.0f, -1.0f, 0.0f, 1.0f, 0.0f});
  CHECK_THROWS_AS(brute_force_topk(DenseMatrix(0, 2), x, Metric::kMips, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(brute_force_topk(q, DenseMatrix(0, 2), Metric::kMips, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(brute_force_topk(DenseMatrix(1, 3, {1.0f, 0.0f, 0.0f}), x, Metric::kMips, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(brute_force_topk(q, x, Metric::kMips, 0), std::invalid_argument);
  CHECK_THROWS_AS(brute_force_topk(q, x, Metric::kMips, 5), std::invalid_argument);
}

TEST_CASE("measure_recall on index matrices") {
  const IndexMatrix truth(2, 3, {0, 1, 2, 10, 11, 12});

  SUBCASE("identical sets give 1.0") {
    const RecallReport r = measure_recall(truth, truth, 3);
    CHECK(r.mean == 1.0);
    REQUIRE(r.per_query.size() == 2);
    CHECK(r.per_query[0].value == 1.0);
    CHECK(r.per_query[0].k == 3);
  }
  SUBCASE("order within a row does not matter") {
    const IndexMatrix shuffled(2, 3, {2, 0, 1, 12, 10, 11});
    CHECK(measure_recall(shuffled, truth, 3).mean == 1.0);
  }
  SUBCASE("disjoint sets give 0.0") {
    const IndexMatrix other(2, 3, {7, 8, 9, 3, 4, 5});
    CHECK(measure_recall(other, truth, 3).mean == 0.0);
  }
  SUBCASE("partial overlap averages per query") {
    // Row 0 shares two of three, row 1 shares one of three.
    const IndexMatrix other(2, 3, {0, 1, 9, 3, 4, 12});
    const RecallReport r = measure_recall(other, truth, 3);
    CHECK(r.per_query[0].value == doctest::Approx(2.0 / 3.0));
    CHECK(r.per_query[1].value == doctest::Approx(1.0 / 3.0));
    CHECK(r.mean == doctest::Approx(0.5));
  }
  SUBCASE("k may be smaller than the stored columns") {
    const IndexMatrix other(2, 3, {0, 5, 6, 10, 5, 6});
    CHECK(measure_recall(other, truth, 1).mean == 1.0);
  }
  SUBCASE("validation") {
    const IndexMatrix narrow(2, 2, {0, 1, 10, 11});
    CHECK_THROWS_AS(measure_recall(narrow, truth, 3), std::invalid_argument);
    CHECK_THROWS_AS(measure_recall(truth, narrow, 3), std::invalid_argument);
    CHECK_THROWS_AS(measure_recall(truth, truth, 0), std::invalid_argument);
    const IndexMatrix one_row(1, 3, {0, 1, 2});
    CHECK_THROWS_AS(measure_recall(one_row, truth, 3), std::invalid_argument);
  }
}

TEST_CASE("measure_recall on TopKResult pairs") {
  TopKResult a;
  a.values = DenseMatrix(1, 2, {5.0f, 4.0f});
  a.indices = IndexMatrix(1, 2, {3, 4});
  TopKResult b = a;
  CHECK(measure_recall(a, b).mean == 1.0);
  b.indices = IndexMatrix(1, 2, {4, 9});
  CHECK(measure_recall(a, b).mean == 0.5);

  TopKResult narrow;
  narrow.values = DenseMatrix(1, 1, {5.0f});
  narrow.indices = IndexMatrix(1, 1, {3});
  CHECK_THROWS_AS(measure_recall(a, narrow), std::invalid_argument);
}
