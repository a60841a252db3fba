#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <optional>
#include <stdexcept>
#include <utility>
#include <variant>

#include "bintopk/bench.hpp"
#include "bintopk/dataio.hpp"
#include "bintopk/matrix.hpp"
#include "bintopk/oracle.hpp"
#include "bintopk/recall.hpp"
#include "bintopk/reduce.hpp"
#include "bintopk/rescore.hpp"
#include "bintopk/roofline.hpp"

namespace py = pybind11;
using namespace bintopk;

namespace {

DenseMatrix dense_from_numpy(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d float32 array");
  DenseMatrix m(a.shape(0), a.shape(1));
  if (a.size() > 0) {
    std::memcpy(m.row(0), a.data(), static_cast<std::size_t>(a.size()) * sizeof(float));
  }
  return m;
}

IndexMatrix index_from_numpy(const py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d int32 array");
  IndexMatrix m(a.shape(0), a.shape(1));
  if (a.size() > 0) {
    std::memcpy(m.row(0), a.data(), static_cast<std::size_t>(a.size()) * sizeof(std::int32_t));
  }
  return m;
}

py::array_t<float> dense_to_numpy(const DenseMatrix& m) {
  py::array_t<float> out({m.rows(), m.cols()});
  if (m.rows() > 0 && m.cols() > 0) {
    std::memcpy(out.mutable_data(), m.row(0),
                static_cast<std::size_t>(m.rows() * m.cols()) * sizeof(float));
  }
  return out;
}

py::array_t<std::int32_t> index_to_numpy(const IndexMatrix& m) {
  py::array_t<std::int32_t> out({m.rows(), m.cols()});
  if (m.rows() > 0 && m.cols() > 0) {
    std::memcpy(out.mutable_data(), m.row(0),
                static_cast<std::size_t>(m.rows() * m.cols()) * sizeof(std::int32_t));
  }
  return out;
}

Metric metric_from_name(const std::string& name) {
  if (name == "mips") return Metric::kMips;
  if (name == "cosine") return Metric::kCosine;
  if (name == "l2" || name == "euclidean") return Metric::kEuclidean;
  throw std::invalid_argument("metric must be one of: mips, cosine, l2");
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Approximate top-k similarity search: fused score+reduce kernel, "
              "analytic bin planning, exact rescoring, and roofline analytics.";

  py::class_<BinPlan>(mod, "BinPlan")
      .def_readonly("bin_width_exp", &BinPlan::bin_width_exp)
      .def_readonly("num_bins", &BinPlan::num_bins)
      .def_readonly("database_size", &BinPlan::database_size)
      .def_readonly("k", &BinPlan::k)
      .def_readonly("recall_target", &BinPlan::recall_target)
      .def("__repr__", [](const BinPlan& p) {
        return "BinPlan(w=" + std::to_string(p.bin_width_exp) +
               ", l=" + std::to_string(p.num_bins) + ", n=" + std::to_string(p.database_size) +
               ")";
      });

  py::class_<HardwareSpec>(mod, "HardwareSpec")
      .def(py::init([](std::string name, double pi, double beta, double gamma) {
             HardwareSpec hw;
             hw.name = std::move(name);
             hw.pi = pi;
             hw.beta = beta;
             hw.gamma = gamma;
             return hw;
           }),
           py::arg("name"), py::arg("pi"), py::arg("beta"), py::arg("gamma"))
      .def_readwrite("name", &HardwareSpec::name)
      .def_readwrite("pi", &HardwareSpec::pi)
      .def_readwrite("beta", &HardwareSpec::beta)
      .def_readwrite("gamma", &HardwareSpec::gamma);

  py::class_<RooflineReport>(mod, "RooflineReport")
      .def_readonly("attainable", &RooflineReport::attainable)
      .def_property_readonly("bound",
                             [](const RooflineReport& r) { return std::string(bound_name(r.bound)); })
      .def_readonly("i_mem", &RooflineReport::i_mem)
      .def_readonly("i_cop", &RooflineReport::i_cop)
      .def_readonly("runtime_lower_bound", &RooflineReport::runtime_lower_bound);

  mod.def("expected_recall", &expected_recall, py::arg("k"), py::arg("bins"));
  mod.def("min_bins", &min_bins, py::arg("k"), py::arg("recall_target"));
  mod.def("approx_min_bins", &approx_min_bins, py::arg("k"), py::arg("recall_target"));
  mod.def("plan_bins", &plan_bins, py::arg("database_size"), py::arg("k"),
          py::arg("recall_target"), py::arg("size_override") = 0);
  mod.def(
      "simulate_recall",
      [](std::int64_t k, std::int64_t bins, std::int64_t trials, std::uint64_t seed) {
        const RecallEstimate est = simulate_recall(k, bins, trials, seed);
        return py::make_tuple(est.expected, est.std_error);
      },
      py::arg("k"), py::arg("bins"), py::arg("trials"), py::arg("seed") = 1);

  mod.def(
      "search",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& queries,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& database,
         const std::string& metric, std::int64_t k, double recall_target, bool aggregate,
         std::int64_t size_override, int threads) {
        SearchOptions options;
        options.k = k;
        options.recall_target = recall_target;
        options.aggregate = aggregate;
        options.size_override = size_override;
        options.threads = threads;
        const DenseMatrix q = dense_from_numpy(queries);
        const DenseMatrix x = dense_from_numpy(database);
        SearchResult result = search(q, x, metric_from_name(metric), options);
        if (const auto* topk = std::get_if<TopKResult>(&result)) {
          return py::make_tuple(dense_to_numpy(topk->values), index_to_numpy(topk->indices));
        }
        const auto& cands = std::get<CandidateSet>(result);
        return py::make_tuple(dense_to_numpy(cands.values), index_to_numpy(cands.indices));
      },
      py::arg("queries"), py::arg("database"), py::arg("metric") = "mips", py::arg("k") = 10,
      py::arg("recall_target") = 0.95, py::arg("aggregate") = true,
      py::arg("size_override") = 0, py::arg("threads") = 0,
      "Approximate top-k search; returns (values, indices) as numpy arrays.");

  mod.def(
      "brute_force",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& queries,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& database,
         const std::string& metric, std::int64_t k, int threads) {
        const TopKResult r = brute_force_topk(dense_from_numpy(queries),
                                              dense_from_numpy(database),
                                              metric_from_name(metric), k, threads);
        return py::make_tuple(dense_to_numpy(r.values), index_to_numpy(r.indices));
      },
      py::arg("queries"), py::arg("database"), py::arg("metric") = "mips", py::arg("k") = 10,
      py::arg("threads") = 0, "Exact top-k by full scan; returns (values, indices).");

  mod.def(
      "measure_recall",
      [](const py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>& result,
         const py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>& truth,
         std::int64_t k) {
        return measure_recall(index_from_numpy(result), index_from_numpy(truth), k).mean;
      },
      py::arg("result"), py::arg("truth"), py::arg("k"),
      "Mean |result ∩ truth| / k over query rows.");

  mod.def(
      "partial_reduce",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& queries,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& database,
         const std::string& metric, const BinPlan& plan, int threads) {
        const DenseMatrix q = dense_from_numpy(queries);
        const DenseMatrix x = dense_from_numpy(database);
        const Metric m = metric_from_name(metric);
        std::vector<float> half_norms;
        if (m == Metric::kEuclidean) half_norms = precompute_half_norms(x);
        const CandidateSet c = partial_reduce(q, x, m, plan, half_norms, std::nullopt, threads);
        return py::make_tuple(dense_to_numpy(c.values), index_to_numpy(c.indices));
      },
      py::arg("queries"), py::arg("database"), py::arg("metric"), py::arg("plan"),
      py::arg("threads") = 0,
      "Fused score + per-bin reduction; returns (values, indices) with one column per bin.");

  mod.def("count_cops",
          [](const std::string& metric, std::int64_t d, std::int64_t n) {
            return count_cops(metric_from_name(metric), d, n);
          },
          py::arg("metric"), py::arg("d"), py::arg("n"));
  mod.def("cop_intensity", &cop_intensity, py::arg("d"), py::arg("c"));
  mod.def("cop_budget", &cop_budget, py::arg("d"), py::arg("hw"));
  mod.def("blas3_intensity", &blas3_intensity, py::arg("m"), py::arg("n"), py::arg("d"));
  mod.def(
      "attainable",
      [](const HardwareSpec& hw, double i_mem, double i_cop) {
        const RooflineReport r = attainable_performance(hw, i_mem, i_cop);
        return py::make_tuple(r.attainable, std::string(bound_name(r.bound)));
      },
      py::arg("hw"), py::arg("i_mem"), py::arg("i_cop"),
      "Roofline bound; returns (flops_per_second, bound_name).");
  mod.def("load_hardware_spec", &load_hardware_spec, py::arg("path"));

  mod.def(
      "gen_synthetic",
      [](std::int64_t rows, std::int64_t cols, const std::string& kind, std::uint64_t seed) {
        SyntheticKind sk;
        if (kind == "gaussian") {
          sk = SyntheticKind::kGaussian;
        } else if (kind == "uniform-sphere") {
          sk = SyntheticKind::kUniformSphere;
        } else {
          throw std::invalid_argument("kind must be gaussian or uniform-sphere");
        }
        return dense_to_numpy(gen_synthetic(rows, cols, sk, seed));
      },
      py::arg("rows"), py::arg("cols"), py::arg("kind") = "gaussian", py::arg("seed") = 1);

  mod.def("read_fvecs",
          [](const std::filesystem::path& path) { return dense_to_numpy(read_fvecs(path)); },
          py::arg("path"));
  mod.def("read_ivecs",
          [](const std::filesystem::path& path) { return index_to_numpy(read_ivecs(path)); },
          py::arg("path"));
  mod.def(
      "write_fvecs",
      [](const std::filesystem::path& path,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
        write_fvecs(path, dense_from_numpy(a));
      },
      py::arg("path"), py::arg("array"));
  mod.def(
      "write_ivecs",
      [](const std::filesystem::path& path,
         const py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>& a) {
        write_ivecs(path, index_from_numpy(a));
      },
      py::arg("path"), py::arg("array"));
}
