#include "bintopk/dataio.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

#include "bintopk/error.hpp"

namespace bintopk {

namespace {

static_assert(std::endian::native == std::endian::little,
              "the codec reads file payloads as native 32-bit words");

std::vector<char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("cannot open file", path.string());
  const std::streamoff size = in.tellg();
  in.seekg(0);
  std::vector<char> bytes(static_cast<std::size_t>(size));
  if (size > 0 && !in.read(bytes.data(), size)) {
    throw FormatError("read failed", path.string());
  }
  return bytes;
}

// Shared record walk for both codecs; T is float or int32_t.
template <class T, class Matrix>
Matrix read_vecs(const std::filesystem::path& path, std::optional<std::int64_t> expect_dim) {
  const std::vector<char> bytes = read_bytes(path);
  const std::string origin = path.string();

  if (bytes.empty()) {
    if (!expect_dim) {
      throw FormatError("empty file: cannot infer dimension (pass an explicit dimension)",
                        origin, 0);
    }
    if (*expect_dim < 1) throw FormatError("dimension must be positive", origin, 0);
    return Matrix(0, *expect_dim);
  }

  std::vector<T> data;
  std::int64_t dim = -1;
  std::int64_t rows = 0;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < sizeof(std::int32_t)) {
      throw FormatError("truncated record header", origin, static_cast<std::int64_t>(pos));
    }
    std::int32_t d = 0;
    std::memcpy(&d, bytes.data() + pos, sizeof(d));
    if (d <= 0) {
      throw FormatError("record dimension " + std::to_string(d) + " is not positive", origin,
                        static_cast<std::int64_t>(pos));
    }
    if (dim < 0) {
      dim = d;
      if (expect_dim && *expect_dim != dim) {
        throw FormatError("file dimension " + std::to_string(dim) +
                              " does not match expected " + std::to_string(*expect_dim),
                          origin, static_cast<std::int64_t>(pos));
      }
    } else if (d != dim) {
      throw FormatError("record dimension " + std::to_string(d) +
                            " differs from earlier dimension " + std::to_string(dim),
                        origin, static_cast<std::int64_t>(pos));
    }
    pos += sizeof(std::int32_t);
    const std::size_t payload = static_cast<std::size_t>(dim) * sizeof(T);
    if (bytes.size() - pos < payload) {
      throw FormatError("truncated record payload", origin, static_cast<std::int64_t>(pos));
    }
    const std::size_t old = data.size();
    data.resize(old + static_cast<std::size_t>(dim));
    std::memcpy(data.data() + old, bytes.data() + pos, payload);
    pos += payload;
    ++rows;
  }
  return Matrix(rows, dim, std::move(data));
}

template <class T, class Matrix>
void write_vecs(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open file for writing", path.string());
  const std::int32_t dim = static_cast<std::int32_t>(m.cols());
  for (std::int64_t i = 0; i < m.rows(); ++i) {
    out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    out.write(reinterpret_cast<const char*>(m.row(i)),
              static_cast<std::streamsize>(m.cols() * sizeof(T)));
  }
  if (!out) throw FormatError("write failed", path.string());
}

}  // namespace

DenseMatrix read_fvecs(const std::filesystem::path& path,
                       std::optional<std::int64_t> expect_dim) {
  return read_vecs<float, DenseMatrix>(path, expect_dim);
}

IndexMatrix read_ivecs(const std::filesystem::path& path,
                       std::optional<std::int64_t> expect_dim) {
  return read_vecs<std::int32_t, IndexMatrix>(path, expect_dim);
}

void write_fvecs(const std::filesystem::path& path, const DenseMatrix& m) {
  write_vecs<float, DenseMatrix>(path, m);
}

void write_ivecs(const std::filesystem::path& path, const IndexMatrix& m) {
  write_vecs<std::int32_t, IndexMatrix>(path, m);
}

DenseMatrix gen_synthetic(std::int64_t rows, std::int64_t cols, SyntheticKind kind,
                          std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("gen_synthetic: sizes must be positive");
  DenseMatrix out(rows, cols);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (auto& v : out.data()) v = normal(rng);
  if (kind == SyntheticKind::kUniformSphere) {
    for (std::int64_t i = 0; i < rows; ++i) {
      float* row = out.row(i);
      const float norm = std::sqrt(row_sumsq(out.row_span(i)));
      if (norm > 0.0f) {
        for (std::int64_t j = 0; j < cols; ++j) row[j] /= norm;
      } else {
        row[0] = 1.0f;  // measure-zero fallback keeps the row on the sphere
      }
    }
  }
  return out;
}

DenseMatrix pad_columns(const DenseMatrix& m, std::int64_t new_cols) {
  if (new_cols < m.cols()) {
    throw std::invalid_argument("pad_columns: new_cols is smaller than the current width");
  }
  DenseMatrix out(m.rows(), new_cols);
  for (std::int64_t i = 0; i < m.rows(); ++i) {
    std::memcpy(out.row(i), m.row(i), static_cast<std::size_t>(m.cols()) * sizeof(float));
  }
  return out;
}

std::vector<std::int32_t> random_permutation(std::int64_t n, std::uint64_t seed) {
  if (n < 0 || n > std::numeric_limits<std::int32_t>::max()) {
    throw std::invalid_argument("random_permutation: n out of range");
  }
  std::vector<std::int32_t> perm(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(i);
  std::mt19937_64 rng(seed);
  for (std::int64_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<std::int64_t> pick(0, i);
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
  }
  return perm;
}

std::vector<std::int32_t> inverse_permutation(const std::vector<std::int32_t>& perm) {
  std::vector<std::int32_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    inv[static_cast<std::size_t>(perm[i])] = static_cast<std::int32_t>(i);
  }
  return inv;
}

DenseMatrix permute_rows(const DenseMatrix& m, const std::vector<std::int32_t>& perm) {
  if (std::ssize(perm) != m.rows()) {
    throw std::invalid_argument("permute_rows: permutation length differs from rows");
  }
  DenseMatrix out(m.rows(), m.cols());
  for (std::int64_t i = 0; i < m.rows(); ++i) {
    std::memcpy(out.row(i), m.row(perm[static_cast<std::size_t>(i)]),
                static_cast<std::size_t>(m.cols()) * sizeof(float));
  }
  return out;
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = seed;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::uint64_t matrix_hash(const DenseMatrix& m) {
  const std::int64_t shape[2] = {m.rows(), m.cols()};
  std::uint64_t hash = fnv1a64(shape, sizeof(shape));
  return fnv1a64(m.data().data(), m.data().size() * sizeof(float), hash);
}

}  // namespace bintopk
