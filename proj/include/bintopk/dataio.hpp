#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "bintopk/matrix.hpp"

namespace bintopk {

// fvecs/ivecs: repeated records of [little-endian int32 dim][dim little-endian
// 32-bit payloads]. All records must share one dim. An empty file has no dim
// to infer, so expect_dim must be supplied to get the 0-row matrix; when rows
// exist, a supplied expect_dim must match. Defects raise FormatError with the
// byte offset.
DenseMatrix read_fvecs(const std::filesystem::path& path,
                       std::optional<std::int64_t> expect_dim = std::nullopt);
IndexMatrix read_ivecs(const std::filesystem::path& path,
                       std::optional<std::int64_t> expect_dim = std::nullopt);
void write_fvecs(const std::filesystem::path& path, const DenseMatrix& m);
void write_ivecs(const std::filesystem::path& path, const IndexMatrix& m);

enum class SyntheticKind { kGaussian, kUniformSphere };

// Deterministic synthetic data: iid standard normals, or those rows
// L2-normalized onto the unit sphere (cosine-ready).
DenseMatrix gen_synthetic(std::int64_t rows, std::int64_t cols, SyntheticKind kind,
                          std::uint64_t seed);

// Appends zero columns on the right until the row width reaches new_cols
// (dot products and Euclidean distances are unchanged by zero padding).
DenseMatrix pad_columns(const DenseMatrix& m, std::int64_t new_cols);

// Uniform random permutation of 0..n-1 (Fisher-Yates, seeded).
std::vector<std::int32_t> random_permutation(std::int64_t n, std::uint64_t seed);
std::vector<std::int32_t> inverse_permutation(const std::vector<std::int32_t>& perm);

// Row i of the result is row perm[i] of the input.
DenseMatrix permute_rows(const DenseMatrix& m, const std::vector<std::int32_t>& perm);

// FNV-1a over raw bytes; pass a previous result as `seed` to chain. Content
// keys for ground-truth caching.
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t matrix_hash(const DenseMatrix& m);

}  // namespace bintopk
