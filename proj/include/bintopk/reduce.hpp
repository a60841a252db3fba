#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bintopk/matrix.hpp"
#include "bintopk/recall.hpp"

namespace bintopk {

// Per-query best score and row index for every bin. An index equal to
// database_rows marks a bin that never received a selectable score (it was
// past the end of the database, or held only NaN scores).
struct CandidateSet {
  DenseMatrix values;          // queries x bins
  IndexMatrix indices;         // queries x bins
  BinPlan plan;
  Direction direction = Direction::kMax;
  std::int64_t database_rows = 0;  // rows actually scored; also the sentinel index
};

// Cache blocking for the fused kernel: query rows are processed in blocks of
// query_block, database rows in tiles of db_block (a power of two, so tiles
// never straddle a bin except when the bin is wider than the tile).
struct BlockLayout {
  std::int64_t query_block = 0;  // ib
  std::int64_t db_block = 0;     // jb
};

// Heuristic blocking: query_block balances re-streaming the database against
// output traffic, db_block sizes the packed tile for L2 residency. The
// returned db_block is a power of two, so it divides or is divided by the
// bin width for every plan.
BlockLayout default_layout(std::int64_t queries, std::int64_t database_rows, std::int64_t dim,
                           std::uint32_t bin_width_exp);

// ||x_j||^2 / 2 for every database row, the additive term of the relaxed
// Euclidean score.
std::vector<float> precompute_half_norms(const DenseMatrix& database);

// 2*m*n*d, the multiply-add count of scoring m queries against n rows of
// dimension d. Throws on int64 overflow.
std::int64_t count_flops(std::int64_t m, std::int64_t n, std::int64_t d);

// Fused scoring + per-bin argmax/argmin. Scores every (query, database row)
// pair under `metric` and keeps, per query and per bin of 2^W consecutive
// rows, the single best score and its row index. The m x n score matrix is
// never materialized: scratch is O(dim + 4) * db_block floats per thread.
//
// plan.database_size may exceed database.rows() (a shard scored against a
// plan sized for the full collection); the trailing bins stay at their
// sentinel. half_norms must be precompute_half_norms(database) for the
// Euclidean metric and empty otherwise. A supplied layout must satisfy the
// divisibility rule (db_block divides 2^W or vice versa). threads == 0 uses
// one thread per available core. Results are bit-identical for every valid
// layout and thread count. Cosine callers pass pre-normalized rows; search()
// performs that pre-pass.
CandidateSet partial_reduce(const DenseMatrix& queries, const DenseMatrix& database,
                            Metric metric, const BinPlan& plan,
                            std::span<const float> half_norms = {},
                            std::optional<BlockLayout> layout = std::nullopt, int threads = 0);

// Materializes the full m x n score matrix with the same blocked scoring
// kernel partial_reduce fuses its reduction into. This is the scoring half
// of the reshape-then-select baseline; memory grows with m*n.
DenseMatrix score_matrix(const DenseMatrix& queries, const DenseMatrix& database, Metric metric,
                         std::span<const float> half_norms = {},
                         std::optional<BlockLayout> layout = std::nullopt, int threads = 0);

// Scratch bytes allocated by the most recent partial_reduce call, summed over
// its threads. Exposed so tests can pin down that scratch scales with the
// block layout and not with queries x database_rows.
std::size_t last_reduce_workspace_bytes() noexcept;

}  // namespace bintopk
