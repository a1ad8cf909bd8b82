#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <vector>

#include "gemmlab/cpu_parallel.hpp"
#include "gemmlab/errors.hpp"
#include "gemmlab/gpu.hpp"
#include "gemmlab/harness.hpp"
#include "gemmlab/matrix.hpp"
#include "gemmlab/report.hpp"

namespace py = pybind11;
using namespace gemmlab;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const FloatArray& array) {
  if (array.ndim() != 2) throw ShapeError("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(array.shape(0));
  const auto cols = static_cast<std::size_t>(array.shape(1));
  std::vector<float> data(array.data(), array.data() + rows * cols);
  return Matrix(rows, cols, std::move(data));
}

FloatArray to_array(const Matrix& m) {
  FloatArray out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dense matrix-multiplication benchmark laboratory (sequential, parallel CPU, GPU).";

  auto base = py::register_exception<Error>(m, "GemmlabError", PyExc_RuntimeError);
  py::register_exception<InvalidDimension>(m, "InvalidDimension", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DeviceUnavailable>(m, "DeviceUnavailable", base.ptr());
  py::register_exception<MeasurementCorrupt>(m, "MeasurementCorrupt", base.ptr());
  py::register_exception<EmptyReport>(m, "EmptyReport", base.ptr());
  py::register_exception<InsufficientData>(m, "InsufficientData", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());

  m.def("random_matrix", [](std::size_t n, std::uint64_t seed) { return to_array(random_matrix(n, seed)); },
        py::arg("n"), py::arg("seed") = 42, "n x n float32 matrix of SplitMix64 values in [0, 1).");
  m.def("identity_matrix", [](std::size_t n) { return to_array(identity_matrix(n)); }, py::arg("n"));
  m.def("zero_matrix", [](std::size_t n) { return to_array(zero_matrix(n)); }, py::arg("n"));

  m.def(
      "matmul_sequential",
      [](const FloatArray& a, const FloatArray& b) {
        const Matrix ma = to_matrix(a);
        const Matrix mb = to_matrix(b);
        Matrix c = [&] {
          py::gil_scoped_release release;
          return matmul_sequential(ma, mb);
        }();
        return to_array(c);
      },
      py::arg("a"), py::arg("b"), "Reference triple loop, k ascending, float accumulation.");

  m.def(
      "matmul_parallel_cpu",
      [](const FloatArray& a, const FloatArray& b, std::optional<std::size_t> workers,
         std::optional<std::size_t> chunk, const std::string& schedule) {
        CpuParallelConfig cfg;
        cfg.workers = workers;
        cfg.chunk = chunk;
        if (schedule == "dynamic") {
          cfg.schedule = CpuSchedule::Dynamic;
        } else if (schedule != "static") {
          throw ConfigError("schedule must be 'static' or 'dynamic'");
        }
        const Matrix ma = to_matrix(a);
        const Matrix mb = to_matrix(b);
        Matrix c = [&] {
          py::gil_scoped_release release;
          return matmul_parallel_cpu(ma, mb, cfg);
        }();
        return to_array(c);
      },
      py::arg("a"), py::arg("b"), py::arg("workers") = py::none(), py::arg("chunk") = py::none(),
      py::arg("schedule") = "static");

  m.def(
      "compare",
      [](const FloatArray& expected, const FloatArray& actual) {
        const auto r = compare(to_matrix(expected), to_matrix(actual));
        py::dict d;
        d["max_abs_diff"] = r.max_abs_diff;
        d["max_rel_diff"] = r.max_rel_diff;
        d["worst_index"] = py::make_tuple(r.worst_index.first, r.worst_index.second);
        return d;
      },
      py::arg("expected"), py::arg("actual"));

  py::class_<gpu::DeviceInfo>(m, "DeviceInfo")
      .def_readonly("available", &gpu::DeviceInfo::available)
      .def_readonly("name", &gpu::DeviceInfo::name)
      .def_readonly("dedicated_memory_bytes", &gpu::DeviceInfo::dedicated_memory_bytes)
      .def_readonly("max_workgroup_size", &gpu::DeviceInfo::max_workgroup_size)
      .def_readonly("backend", &gpu::DeviceInfo::backend)
      .def_readonly("adapter_type", &gpu::DeviceInfo::adapter_type);
  m.def("probe_device", &gpu::probe_device);

  py::class_<gpu::GpuTiming>(m, "GpuTiming")
      .def_readonly("alloc_ms", &gpu::GpuTiming::alloc_ms)
      .def_readonly("h2d_ms", &gpu::GpuTiming::h2d_ms)
      .def_readonly("kernel_ms", &gpu::GpuTiming::kernel_ms)
      .def_readonly("d2h_ms", &gpu::GpuTiming::d2h_ms)
      .def_readonly("total_ms", &gpu::GpuTiming::total_ms);

  py::class_<Measurement>(m, "Measurement")
      .def_property_readonly("backend", [](const Measurement& x) { return std::string(to_string(x.backend)); })
      .def_readonly("n", &Measurement::n)
      .def_property_readonly("status", [](const Measurement& x) { return std::string(to_string(x.status)); })
      .def_readonly("times_ms", &Measurement::times_ms)
      .def_readonly("median_ms", &Measurement::median_ms)
      .def_readonly("min_ms", &Measurement::min_ms)
      .def_readonly("gpu_phases", &Measurement::gpu_phases)
      .def_readonly("verified", &Measurement::verified)
      .def_readonly("note", &Measurement::note)
      .def("__repr__", [](const Measurement& x) {
        return "<Measurement " + std::string(to_string(x.backend)) + " n=" + std::to_string(x.n) + " " +
               std::string(to_string(x.status)) + ">";
      });

  m.def(
      "run_plan",
      [](std::vector<std::size_t> sizes, const std::vector<std::string>& backends, std::uint64_t seed,
         std::size_t repetitions, std::size_t warmup_runs, const std::string& timing_scope,
         std::optional<std::size_t> max_sequential_size, std::size_t verify_max_size,
         std::optional<std::size_t> threads) {
        BenchmarkPlan plan;
        plan.sizes = std::move(sizes);
        plan.backends.clear();
        for (const auto& b : backends) plan.backends.push_back(parse_backend(b));
        plan.seed = seed;
        plan.repetitions = repetitions;
        plan.warmup_runs = warmup_runs;
        plan.timing_scope = gpu::parse_timing_scope(timing_scope);
        plan.max_sequential_size = max_sequential_size;
        plan.verify_max_size = verify_max_size;
        plan.cpu.workers = threads;
        py::gil_scoped_release release;
        return run_plan(plan);
      },
      py::arg("sizes"), py::arg("backends") = std::vector<std::string>{"seq", "cpu", "gpu-tiled"},
      py::arg("seed") = 42, py::arg("repetitions") = 3, py::arg("warmup_runs") = 1,
      py::arg("timing_scope") = "transfers+kernel", py::arg("max_sequential_size") = py::none(),
      py::arg("verify_max_size") = 1024, py::arg("threads") = py::none());

  py::class_<SpeedupRow>(m, "SpeedupRow")
      .def_readonly("n", &SpeedupRow::n)
      .def_readonly("seq_ms", &SpeedupRow::seq_ms)
      .def_readonly("par_cpu_ms", &SpeedupRow::par_cpu_ms)
      .def_readonly("gpu_ms", &SpeedupRow::gpu_ms)
      .def_readonly("speedup_cpu_vs_seq", &SpeedupRow::speedup_cpu_vs_seq)
      .def_readonly("speedup_gpu_vs_cpu", &SpeedupRow::speedup_gpu_vs_cpu)
      .def_readonly("speedup_gpu_vs_seq", &SpeedupRow::speedup_gpu_vs_seq);

  py::class_<SpeedupTable>(m, "SpeedupTable")
      .def(py::init([](std::vector<SpeedupRow> rows) { return SpeedupTable{std::move(rows)}; }), py::arg("rows"))
      .def_readonly("rows", &SpeedupTable::rows);

  m.def("make_speedup_row", &make_speedup_row, py::arg("n"), py::arg("seq_ms") = py::none(),
        py::arg("par_cpu_ms") = py::none(), py::arg("gpu_ms") = py::none());
  m.def("compute_speedups", &compute_speedups, py::arg("measurements"));

  m.attr("CSV_HEADER") = std::string(report::kCsvHeader);
  m.def("emit_csv", &report::emit_csv, py::arg("table"));
  m.def("parse_csv", [](const std::string& text) { return report::parse_csv(text); }, py::arg("text"));
  m.def("render_table", &report::render_table, py::arg("table"));
  m.def("emit_figures", &report::emit_figures, py::arg("table"), py::arg("out_dir"));
}
