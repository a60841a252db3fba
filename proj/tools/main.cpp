// Command-line front end: synthetic data, ground truth, searches, benchmark
// sweeps, roofline reports, and host calibration. Exit codes: 0 success,
// 2 malformed input file or stale ground truth, 3 invalid arguments.

#include <chrono>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bintopk/bench.hpp"
#include "bintopk/dataio.hpp"
#include "bintopk/error.hpp"
#include "bintopk/matrix.hpp"
#include "bintopk/recall.hpp"
#include "bintopk/rescore.hpp"
#include "bintopk/roofline.hpp"

namespace {

using namespace bintopk;

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

std::string metric_flag(Metric metric) {
  switch (metric) {
    case Metric::kMips: return "mips";
    case Metric::kCosine: return "cosine";
    case Metric::kEuclidean: return "l2";
  }
  return "?";
}

void write_meta(const std::filesystem::path& path,
                const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [key, value] : entries) out << key << " = " << value << "\n";
}

std::map<std::string, std::string> read_meta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("missing ground-truth metadata (regenerate with `truth`)", path.string(),
                      0);
  }
  std::map<std::string, std::string> out;
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("expected key=value", path.string(), 0);
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

struct DatasetArgs {
  std::string data_path;
  std::string queries_path;
  std::int64_t dim = 0;  // 0 = infer from the file
  std::int64_t pad_dim_to = 0;
  bool shuffle_db = false;
  std::uint64_t seed = 1;

  DenseMatrix database;
  DenseMatrix queries;
  std::uint64_t database_hash = 0;  // hashes of the files as stored
  std::uint64_t queries_hash = 0;
  std::vector<std::int32_t> perm;  // shuffled row i holds original row perm[i]

  void add_options(CLI::App* cmd, bool with_transforms) {
    cmd->add_option("--data", data_path, "database .fvecs file")->required();
    cmd->add_option("--queries", queries_path, "query .fvecs file")->required();
    cmd->add_option("--dim", dim, "expected dimension (required for empty files)");
    if (with_transforms) {
      cmd->add_option("--pad-dim-to", pad_dim_to, "zero-pad vectors to this width");
      cmd->add_flag("--shuffle-db", shuffle_db, "permute database rows before searching");
      cmd->add_option("--seed", seed, "shuffle seed");
    }
  }

  void load() {
    const std::optional<std::int64_t> expect =
        dim > 0 ? std::optional<std::int64_t>(dim) : std::nullopt;
    database = read_fvecs(data_path, expect);
    queries = read_fvecs(queries_path, expect);
    database_hash = matrix_hash(database);
    queries_hash = matrix_hash(queries);
    if (pad_dim_to > 0) {
      database = pad_columns(database, pad_dim_to);
      queries = pad_columns(queries, pad_dim_to);
    }
    if (shuffle_db) {
      perm = random_permutation(database.rows(), seed);
      database = permute_rows(database, perm);
    }
  }

  // Map an index in the (possibly shuffled) database back to the stored row.
  std::int32_t original_index(std::int32_t shuffled) const {
    if (perm.empty() || shuffled < 0 || shuffled >= static_cast<std::int32_t>(perm.size())) {
      return shuffled;
    }
    return perm[static_cast<std::size_t>(shuffled)];
  }
};

std::ostream& open_or_stdout(std::ofstream& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file.open(path, std::ios::trunc);
  if (!file) throw std::runtime_error("cannot write " + path);
  return file;
}

int run_gen(const std::string& out, std::int64_t rows, std::int64_t cols,
            const std::string& dist, std::uint64_t seed) {
  const SyntheticKind kind =
      dist == "uniform-sphere" ? SyntheticKind::kUniformSphere : SyntheticKind::kGaussian;
  const DenseMatrix m = gen_synthetic(rows, cols, kind, seed);
  write_fvecs(out, m);
  std::cout << "wrote " << out << ": " << m.rows() << " x " << m.cols() << " (" << dist
            << ", seed " << seed << ")\n";
  return 0;
}

int run_truth(DatasetArgs& ds, Metric metric, std::int64_t k, const std::string& out,
              int threads) {
  ds.load();
  const TopKResult truth = brute_force_topk(ds.queries, ds.database, metric, k, threads);
  write_ivecs(out, truth.indices);
  write_meta(out + ".meta", {
                                {"dataset_hash", hex64(ds.database_hash)},
                                {"queries_hash", hex64(ds.queries_hash)},
                                {"metric", metric_flag(metric)},
                                {"k", std::to_string(k)},
                            });
  std::cout << "wrote " << out << ": exact top-" << k << " for " << truth.indices.rows()
            << " queries\n";
  return 0;
}

// A truth file is only trusted when its sidecar matches the current inputs.
IndexMatrix load_verified_truth(const std::string& path, const DatasetArgs& ds, Metric metric,
                                std::int64_t k) {
  const auto meta = read_meta(path + ".meta");
  auto field = [&](const std::string& key) {
    const auto it = meta.find(key);
    if (it == meta.end()) {
      throw FormatError("metadata lacks \"" + key + "\"", path + ".meta", 0);
    }
    return it->second;
  };
  if (field("dataset_hash") != hex64(ds.database_hash) ||
      field("queries_hash") != hex64(ds.queries_hash)) {
    throw FormatError("ground truth is stale: dataset or queries changed since `truth` ran",
                      path + ".meta", 0);
  }
  if (field("metric") != metric_flag(metric)) {
    throw FormatError("ground truth is stale: metric was " + field("metric"), path + ".meta",
                      0);
  }
  if (std::stoll(field("k")) < k) {
    throw FormatError("ground truth is stale: computed for k=" + field("k"), path + ".meta",
                      0);
  }
  return read_ivecs(path);
}

// Rows [begin, end) of the query set as their own matrix.
DenseMatrix query_slice(const DenseMatrix& queries, std::int64_t begin, std::int64_t end) {
  DenseMatrix out(end - begin, queries.cols());
  std::memcpy(out.row(0), queries.row(begin),
              static_cast<std::size_t>((end - begin) * queries.cols()) * sizeof(float));
  return out;
}

int run_search(DatasetArgs& ds, Metric metric, const SearchOptions& options,
               std::int64_t batch, const std::string& out, const std::string& values_out) {
  ds.load();
  SearchOptions opts = options;
  const std::int64_t m = ds.queries.rows();
  const BinPlan plan =
      plan_bins(ds.database.rows(), opts.k, opts.recall_target, opts.size_override);
  const std::int64_t out_cols = opts.aggregate ? opts.k : plan.num_bins;

  DenseMatrix all_values(m, out_cols);
  IndexMatrix all_indices(m, out_cols);
  const std::int64_t step = batch > 0 ? batch : m;
  const auto start = std::chrono::steady_clock::now();
  for (std::int64_t begin = 0; begin < m || (m == 0 && begin == 0); begin += step) {
    const std::int64_t end = std::min(begin + step, m);
    const DenseMatrix slice = m == 0 ? ds.queries : query_slice(ds.queries, begin, end);
    SearchResult result = search(slice, ds.database, metric, opts);
    const DenseMatrix* part_values = nullptr;
    const IndexMatrix* part_indices = nullptr;
    if (const auto* topk = std::get_if<TopKResult>(&result)) {
      part_values = &topk->values;
      part_indices = &topk->indices;
    } else {
      const auto& cands = std::get<CandidateSet>(result);
      part_values = &cands.values;
      part_indices = &cands.indices;
    }
    if (end > begin) {
      std::memcpy(all_values.row(begin), part_values->row(0),
                  static_cast<std::size_t>((end - begin) * out_cols) * sizeof(float));
      std::memcpy(all_indices.row(begin), part_indices->row(0),
                  static_cast<std::size_t>((end - begin) * out_cols) * sizeof(std::int32_t));
    }
    if (m == 0) break;
  }
  const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                         .count();

  DenseMatrix* values = &all_values;
  IndexMatrix* indices = &all_indices;
  if (!ds.perm.empty()) {
    for (std::int64_t i = 0; i < indices->rows(); ++i) {
      for (std::int64_t j = 0; j < indices->cols(); ++j) {
        indices->at(i, j) = ds.original_index(indices->at(i, j));
      }
    }
  }
  if (!out.empty()) write_ivecs(out, *indices);
  if (!values_out.empty()) write_fvecs(values_out, *values);

  std::cout << "searched " << ds.queries.rows() << " queries over " << ds.database.rows()
            << " rows: w=" << plan.bin_width_exp << " l=" << plan.num_bins << " batch=" << batch
            << " seconds=" << sec << " qps=" << static_cast<double>(ds.queries.rows()) / sec
            << "\n";
  if (out.empty() && values_out.empty() && indices->rows() > 0) {
    std::cout << "first query:";
    for (std::int64_t j = 0; j < indices->cols() && j < 10; ++j) {
      std::cout << ' ' << indices->at(0, j) << ':' << values->at(0, j);
    }
    std::cout << "\n";
  }
  return 0;
}

int run_bench(DatasetArgs& ds, Metric metric, const BenchConfig& config,
              const std::string& truth_path, const std::string& out, bool with_baseline,
              std::uint64_t seed) {
  ds.load();
  IndexMatrix truth = load_verified_truth(truth_path, ds, metric, config.k);
  if (!ds.perm.empty()) {
    // Recall only needs consistent labels; relabel truth into shuffled ids.
    const std::vector<std::int32_t> inv = inverse_permutation(ds.perm);
    for (std::int64_t i = 0; i < truth.rows(); ++i) {
      for (std::int64_t j = 0; j < truth.cols(); ++j) {
        truth.at(i, j) = inv[static_cast<std::size_t>(truth.at(i, j))];
      }
    }
  }

  const std::vector<BenchPoint> points = bench_sweep(ds.queries, ds.database, truth, metric,
                                                     config);
  std::ofstream file;
  std::ostream& os = open_or_stdout(file, out);
  write_bench_csv(os, points);
  os.flush();

  if (!out.empty()) {
    std::ostringstream targets;
    for (std::size_t i = 0; i < config.recall_targets.size(); ++i) {
      targets << (i ? "," : "") << config.recall_targets[i];
    }
    write_meta(out + ".meta",
               {
                   {"dataset", ds.data_path},
                   {"dataset_hash", hex64(ds.database_hash)},
                   {"queries", ds.queries_path},
                   {"queries_hash", hex64(ds.queries_hash)},
                   {"metric", metric_flag(metric)},
                   {"k", std::to_string(config.k)},
                   {"targets", targets.str()},
                   {"batch", std::to_string(config.batch)},
                   {"pad_dim_to", std::to_string(ds.pad_dim_to)},
                   {"shuffle_db", ds.shuffle_db ? "true" : "false"},
                   {"seed", std::to_string(seed)},
                   {"warmup_runs", std::to_string(config.warmup_runs)},
                   {"timed_runs", std::to_string(config.timed_runs)},
               });
    std::cout << "wrote " << out << " (+.meta), " << points.size() << " points\n";
  }

  if (with_baseline) {
    const BaselineResult base =
        baseline_full_sort(ds.queries, ds.database, metric, config.k);
    const double fused_qps = points.back().qps;
    const double base_qps = static_cast<double>(ds.queries.rows()) / base.seconds;
    std::cout << "baseline_full_sort: seconds=" << base.seconds << " qps=" << base_qps
              << " (fused qps at last target: " << fused_qps << ")\n";
  }
  return 0;
}

int run_roofline(const std::vector<std::string>& hw_paths,
                 const std::vector<std::string>& profile_paths, const std::string& out) {
  std::vector<RooflineRow> rows;
  for (const std::string& hp : hw_paths) {
    const HardwareSpec hw = load_hardware_spec(hp);
    for (const std::string& pp : profile_paths) {
      const KernelProfile profile = load_kernel_profile(pp);
      RooflineRow row;
      row.name = hw.name + ":" + std::filesystem::path(pp).stem().string();
      row.report = diagnose(hw, profile);
      rows.push_back(std::move(row));
    }
  }
  std::ofstream file;
  std::ostream& os = open_or_stdout(file, out);
  write_roofline_csv(os, rows);
  os.flush();
  if (!out.empty()) std::cout << "wrote " << out << ": " << rows.size() << " rows\n";
  return 0;
}

int run_calibrate(double seconds, const std::string& out) {
  const HardwareSpec hw = calibrate_host(seconds);
  const std::string text = format_hardware_spec(hw);
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream file(out, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write " + out);
    file << text;
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate top-k similarity search over dense vectors"};
  app.require_subcommand(1);

  const std::map<std::string, Metric> metric_names{
      {"mips", Metric::kMips}, {"cosine", Metric::kCosine}, {"l2", Metric::kEuclidean}};
  const std::map<std::string, RescoreAlgo> rescore_names{
      {"selection", RescoreAlgo::kSelection}, {"bitonic", RescoreAlgo::kBitonic}};

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic .fvecs dataset");
  std::string gen_out;
  std::int64_t gen_rows = 1000;
  std::int64_t gen_dim = 64;
  std::string gen_dist = "gaussian";
  std::uint64_t gen_seed = 1;
  gen->add_option("--out", gen_out, "output .fvecs path")->required();
  gen->add_option("--rows", gen_rows, "number of vectors")->check(CLI::PositiveNumber);
  gen->add_option("--dim", gen_dim, "vector dimension")->check(CLI::PositiveNumber);
  gen->add_option("--dist", gen_dist, "distribution")
      ->check(CLI::IsMember({"gaussian", "uniform-sphere"}));
  gen->add_option("--seed", gen_seed, "generator seed");

  // truth
  auto* truth = app.add_subcommand("truth", "compute exact ground truth (.ivecs + .meta)");
  DatasetArgs truth_ds;
  truth_ds.add_options(truth, false);
  Metric truth_metric = Metric::kMips;
  std::int64_t truth_k = 10;
  std::string truth_out;
  int truth_threads = 0;
  truth->add_option("--metric", truth_metric, "similarity to rank by")
      ->transform(CLI::CheckedTransformer(metric_names, CLI::ignore_case));
  truth->add_option("--k", truth_k, "neighbors per query")->check(CLI::PositiveNumber);
  truth->add_option("--out", truth_out, "output .ivecs path")->required();
  truth->add_option("--threads", truth_threads, "worker threads (0 = all cores)");

  // search
  auto* sea = app.add_subcommand("search", "run one approximate (or exact) search");
  DatasetArgs sea_ds;
  sea_ds.add_options(sea, true);
  Metric sea_metric = Metric::kMips;
  SearchOptions sea_opts;
  bool sea_aggregate = true;
  std::string sea_rescore = "selection";
  std::int64_t sea_batch = 0;
  std::string sea_out;
  std::string sea_values_out;
  sea->add_option("--metric", sea_metric, "similarity to rank by")
      ->transform(CLI::CheckedTransformer(metric_names, CLI::ignore_case));
  sea->add_option("--k", sea_opts.k, "neighbors per query")->check(CLI::PositiveNumber);
  sea->add_option("--recall-target", sea_opts.recall_target, "expected recall in (0,1]");
  sea->add_option("--aggregate", sea_aggregate,
                  "true: exact-rescored top-k; false: raw per-bin candidates");
  sea->add_option("--size-override", sea_opts.size_override,
                  "plan bins as if the database had this many rows");
  sea->add_option("--rescore", sea_rescore, "selection algorithm")
      ->check(CLI::IsMember({"selection", "bitonic"}));
  sea->add_option("--batch", sea_batch, "queries per kernel launch (0 = all)");
  sea->add_option("--threads", sea_opts.threads, "worker threads (0 = all cores)");
  sea->add_option("--out", sea_out, "write result indices (.ivecs)");
  sea->add_option("--values-out", sea_values_out, "write result values (.fvecs)");

  // bench
  auto* ben = app.add_subcommand("bench", "speed-recall sweep against cached ground truth");
  DatasetArgs ben_ds;
  ben_ds.add_options(ben, true);
  Metric ben_metric = Metric::kMips;
  BenchConfig ben_config;
  std::string ben_truth;
  std::string ben_out;
  bool ben_baseline = false;
  ben->add_option("--metric", ben_metric, "similarity to rank by")
      ->transform(CLI::CheckedTransformer(metric_names, CLI::ignore_case));
  ben->add_option("--k", ben_config.k, "neighbors per query")->check(CLI::PositiveNumber);
  ben->add_option("--truth", ben_truth, "ground-truth .ivecs from `truth`")->required();
  ben->add_option("--targets", ben_config.recall_targets, "recall targets to sweep")
      ->required()
      ->delimiter(',');
  ben->add_option("--batch", ben_config.batch, "queries per kernel launch (0 = all)");
  ben->add_option("--warmup", ben_config.warmup_runs, "warmup runs (min 3)");
  ben->add_option("--runs", ben_config.timed_runs, "timed runs (min 5, median reported)");
  ben->add_option("--size-override", ben_config.size_override,
                  "plan bins as if the database had this many rows");
  ben->add_option("--threads", ben_config.threads, "worker threads (0 = all cores)");
  ben->add_option("--out", ben_out, "output CSV path (default stdout)");
  ben->add_flag("--baseline", ben_baseline, "also time the unfused full-sort baseline");

  // roofline
  auto* roof = app.add_subcommand("roofline", "attainable-performance report (CSV)");
  std::vector<std::string> roof_hw;
  std::vector<std::string> roof_profiles;
  std::string roof_out;
  roof->add_option("--hw", roof_hw, "hardware spec file(s)")->required();
  roof->add_option("--profile", roof_profiles, "kernel profile file(s)")->required();
  roof->add_option("--out", roof_out, "output CSV path (default stdout)");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "measure this machine's ceilings");
  double cal_seconds = 0.3;
  std::string cal_out;
  cal->add_option("--seconds", cal_seconds, "budget per probe")->check(CLI::PositiveNumber);
  cal->add_option("--out", cal_out, "write a hardware spec file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }

  try {
    if (gen->parsed()) return run_gen(gen_out, gen_rows, gen_dim, gen_dist, gen_seed);
    if (truth->parsed()) {
      return run_truth(truth_ds, truth_metric, truth_k, truth_out, truth_threads);
    }
    if (sea->parsed()) {
      sea_opts.aggregate = sea_aggregate;
      sea_opts.algo = rescore_names.at(sea_rescore);
      return run_search(sea_ds, sea_metric, sea_opts, sea_batch, sea_out, sea_values_out);
    }
    if (ben->parsed()) {
      return run_bench(ben_ds, ben_metric, ben_config, ben_truth, ben_out, ben_baseline,
                       ben_ds.seed);
    }
    if (roof->parsed()) return run_roofline(roof_hw, roof_profiles, roof_out);
    if (cal->parsed()) return run_calibrate(cal_seconds, cal_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
