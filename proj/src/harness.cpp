#include "gemmlab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <set>

#include "gemmlab/errors.hpp"

namespace gemmlab {

std::string_view to_string(Backend backend) noexcept {
  switch (backend) {
    case Backend::Sequential: return "seq";
    case Backend::ParallelCpu: return "cpu";
    case Backend::GpuNaive: return "gpu-naive";
    case Backend::GpuTiled: return "gpu-tiled";
  }
  return "?";
}

Backend parse_backend(std::string_view text) {
  for (Backend b : kAllBackends) {
    if (text == to_string(b)) return b;
  }
  throw ConfigError("unknown backend '" + std::string(text) + "' (expected seq, cpu, gpu-naive or gpu-tiled)");
}

bool is_gpu(Backend backend) noexcept { return backend == Backend::GpuNaive || backend == Backend::GpuTiled; }

std::string_view to_string(CellStatus status) noexcept {
  switch (status) {
    case CellStatus::Ok: return "ok";
    case CellStatus::Skipped: return "skipped";
    case CellStatus::Failed: return "failed";
  }
  return "?";
}

void validate(const BenchmarkPlan& plan) {
  if (plan.sizes.empty()) throw ConfigError("plan has no sizes");
  for (std::size_t i = 0; i < plan.sizes.size(); ++i) {
    if (plan.sizes[i] == 0) throw ConfigError("sizes must be positive");
    if (i > 0 && plan.sizes[i] <= plan.sizes[i - 1]) throw ConfigError("sizes must be strictly increasing");
  }
  if (plan.repetitions == 0) throw ConfigError("repetitions must be >= 1");
  if (plan.backends.empty()) throw ConfigError("plan has no backends");
  std::set<Backend> seen;
  for (Backend b : plan.backends) {
    if (!seen.insert(b).second) throw ConfigError("backend '" + std::string(to_string(b)) + "' listed twice");
  }
  if (plan.cpu.workers && *plan.cpu.workers == 0) throw ConfigError("threads must be >= 1");
  if (plan.cpu.chunk && *plan.cpu.chunk == 0) throw ConfigError("chunk must be >= 1");
}

double median(std::vector<double> values) {
  if (values.empty()) throw MeasurementCorrupt("median of empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

namespace {

using clock = std::chrono::steady_clock;

double elapsed_ms(clock::time_point from, clock::time_point to) {
  return std::chrono::duration<double, std::milli>(to - from).count();
}

// One timed execution: result plus wall time (or scoped GPU total).
struct RunOutcome {
  Matrix c;
  double ms;
  std::optional<gpu::GpuTiming> phases;
};

class BackendRunner {
 public:
  BackendRunner(const RunOptions& options, gpu::TimingScope scope, CpuParallelConfig cpu)
      : options_(options), scope_(scope), cpu_(cpu) {}

  // Empty string when usable, else why the backend is skipped.
  std::string availability(Backend backend) {
    if (!is_gpu(backend) || options_.kernel_overrides.contains(backend)) return {};
    return gpu_context() != nullptr ? std::string{} : gpu_unavailable_reason_;
  }

  RunOutcome run(Backend backend, const Matrix& a, const Matrix& b) {
    if (auto it = options_.kernel_overrides.find(backend); it != options_.kernel_overrides.end()) {
      const auto t0 = clock::now();
      Matrix c = it->second(a, b);
      return {std::move(c), elapsed_ms(t0, clock::now()), std::nullopt};
    }
    switch (backend) {
      case Backend::Sequential: {
        const auto t0 = clock::now();
        Matrix c = matmul_sequential(a, b);
        return {std::move(c), elapsed_ms(t0, clock::now()), std::nullopt};
      }
      case Backend::ParallelCpu: {
        const auto t0 = clock::now();
        Matrix c = matmul_parallel_cpu(a, b, cpu_);
        return {std::move(c), elapsed_ms(t0, clock::now()), std::nullopt};
      }
      case Backend::GpuNaive:
      case Backend::GpuTiled: {
        gpu::GpuContext* ctx = gpu_context();
        if (ctx == nullptr) throw DeviceUnavailable(gpu_unavailable_reason_);
        const auto variant = backend == Backend::GpuNaive ? gpu::KernelVariant::Naive : gpu::KernelVariant::Tiled;
        auto result = gpu::matmul_gpu(*ctx, a, b, variant, scope_);
        return {std::move(result.c), result.timing.total_ms, result.timing};
      }
    }
    throw ConfigError("unhandled backend");
  }

 private:
  gpu::GpuContext* gpu_context() {
    if (options_.gpu != nullptr) return options_.gpu;
    if (!gpu_probed_) {
      gpu_probed_ = true;
      std::string why;
      owned_gpu_ = gpu::GpuContext::open_default(&why);
      if (!owned_gpu_) gpu_unavailable_reason_ = "no GPU device (" + why + ")";
    }
    return owned_gpu_ ? &*owned_gpu_ : nullptr;
  }

  const RunOptions& options_;
  gpu::TimingScope scope_;
  CpuParallelConfig cpu_;
  bool gpu_probed_ = false;
  std::optional<gpu::GpuContext> owned_gpu_;
  std::string gpu_unavailable_reason_ = "no GPU device";
};

bool passes(Backend backend, const Matrix& expected, const Matrix& actual, const ComparisonReport& report) {
  if (is_gpu(backend)) return report.max_rel_diff <= kGpuRelTolerance;
  return expected.bitwise_equal(actual);
}

}  // namespace

std::vector<Measurement> run_plan(const BenchmarkPlan& plan, const RunOptions& options) {
  validate(plan);
  BackendRunner runner(options, plan.timing_scope, plan.cpu);
  std::vector<Measurement> out;
  std::set<Backend> warned;

  for (std::size_t n : plan.sizes) {
    const Matrix a = random_matrix(n, plan.seed);
    const Matrix b = random_matrix(n, plan.seed + 1);
    std::optional<Matrix> oracle;

    for (Backend backend : plan.backends) {
      Measurement m;
      m.backend = backend;
      m.n = n;
      m.input_a_hash = a.fingerprint();
      m.input_b_hash = b.fingerprint();

      if (backend == Backend::Sequential && plan.max_sequential_size && n > *plan.max_sequential_size) {
        m.status = CellStatus::Skipped;
        m.note = "above max sequential size";
        out.push_back(std::move(m));
        continue;
      }
      if (std::string why = runner.availability(backend); !why.empty()) {
        m.status = CellStatus::Skipped;
        m.note = why;
        if (options.log && warned.insert(backend).second) {
          *options.log << "warning: " << to_string(backend) << " skipped: " << why << "\n";
        }
        out.push_back(std::move(m));
        continue;
      }

      try {
        for (std::size_t w = 0; w < plan.warmup_runs; ++w) runner.run(backend, a, b);

        std::vector<gpu::GpuTiming> phases;
        for (std::size_t r = 0; r < plan.repetitions; ++r) {
          RunOutcome outcome = runner.run(backend, a, b);
          if (!(outcome.ms >= 0.0) || !std::isfinite(outcome.ms)) {
            throw MeasurementCorrupt("non-finite or negative timing");
          }
          m.times_ms.push_back(outcome.ms);
          if (outcome.phases) phases.push_back(*outcome.phases);

          if (r == 0 && n <= plan.verify_max_size) {
            if (!oracle) oracle = matmul_sequential(a, b);
            m.check = compare(*oracle, outcome.c);
            m.verified = passes(backend, *oracle, outcome.c, *m.check);
          }
        }
        m.median_ms = median(m.times_ms);
        m.min_ms = *std::min_element(m.times_ms.begin(), m.times_ms.end());
        if (!phases.empty()) {
          auto closest = std::min_element(phases.begin(), phases.end(), [&](const auto& x, const auto& y) {
            return std::fabs(x.total_ms - m.median_ms) < std::fabs(y.total_ms - m.median_ms);
          });
          m.gpu_phases = *closest;
        }
        if (m.check && !m.verified) {
          m.status = CellStatus::Failed;
          m.note = "result mismatch vs sequential oracle";
        }
      } catch (const std::exception& e) {
        m.status = CellStatus::Failed;
        m.note = e.what();
        m.times_ms.clear();
        if (options.log) *options.log << "error: " << to_string(backend) << " failed at n=" << n << ": " << e.what() << "\n";
      }
      if (options.log && m.status == CellStatus::Ok) {
        *options.log << to_string(backend) << " n=" << n << " median " << m.median_ms << " ms\n";
      }
      out.push_back(std::move(m));
    }
  }
  return out;
}

std::vector<VerifyCell> run_verification(const std::vector<std::size_t>& sizes, std::uint64_t seed,
                                         const std::vector<Backend>& backends, const RunOptions& options) {
  BackendRunner runner(options, gpu::TimingScope::TransfersAndKernel, CpuParallelConfig{});
  std::vector<VerifyCell> out;
  for (std::size_t n : sizes) {
    const Matrix a = random_matrix(n, seed);
    const Matrix b = random_matrix(n, seed + 1);
    const Matrix oracle = matmul_sequential(a, b);
    for (Backend backend : backends) {
      VerifyCell cell;
      cell.backend = backend;
      cell.n = n;
      cell.tolerance = is_gpu(backend) ? kGpuRelTolerance : 0.0;
      if (std::string why = runner.availability(backend); !why.empty()) {
        cell.status = CellStatus::Skipped;
        cell.note = why;
        out.push_back(std::move(cell));
        continue;
      }
      try {
        RunOutcome outcome = runner.run(backend, a, b);
        cell.report = compare(oracle, outcome.c);
        cell.pass = passes(backend, oracle, outcome.c, cell.report);
        cell.status = cell.pass ? CellStatus::Ok : CellStatus::Failed;
      } catch (const std::exception& e) {
        cell.status = CellStatus::Failed;
        cell.note = e.what();
      }
      out.push_back(std::move(cell));
    }
  }
  return out;
}

namespace {

void require_valid_timing(std::optional<double> t, const char* what) {
  if (t && (!std::isfinite(*t) || *t <= 0.0)) {
    throw MeasurementCorrupt(std::string(what) + " timing must be positive and finite");
  }
}

std::optional<double> ratio(std::optional<double> num, std::optional<double> den) {
  if (!num || !den) return std::nullopt;
  return *num / *den;
}

}  // namespace

SpeedupRow make_speedup_row(std::size_t n, std::optional<double> seq_ms, std::optional<double> par_cpu_ms,
                            std::optional<double> gpu_ms) {
  require_valid_timing(seq_ms, "sequential");
  require_valid_timing(par_cpu_ms, "parallel CPU");
  require_valid_timing(gpu_ms, "GPU");
  SpeedupRow row;
  row.n = n;
  row.seq_ms = seq_ms;
  row.par_cpu_ms = par_cpu_ms;
  row.gpu_ms = gpu_ms;
  row.speedup_cpu_vs_seq = ratio(seq_ms, par_cpu_ms);
  row.speedup_gpu_vs_cpu = ratio(par_cpu_ms, gpu_ms);
  row.speedup_gpu_vs_seq = ratio(seq_ms, gpu_ms);
  return row;
}

SpeedupTable compute_speedups(const std::vector<Measurement>& measurements) {
  std::map<std::size_t, std::map<Backend, double>> by_size;
  for (const auto& m : measurements) {
    auto& cell = by_size[m.n];
    if (m.status != CellStatus::Ok) continue;
    if (m.times_ms.empty() || !std::isfinite(m.median_ms) || m.median_ms <= 0.0) {
      throw MeasurementCorrupt(std::string(to_string(m.backend)) + " at n=" + std::to_string(m.n) +
                               " has a non-positive median time");
    }
    cell[m.backend] = m.median_ms;
  }

  SpeedupTable table;
  for (const auto& [n, cells] : by_size) {
    auto get = [&cells](Backend b) -> std::optional<double> {
      auto it = cells.find(b);
      return it == cells.end() ? std::nullopt : std::optional<double>(it->second);
    };
    auto gpu = get(Backend::GpuTiled);
    if (!gpu) gpu = get(Backend::GpuNaive);
    table.rows.push_back(make_speedup_row(n, get(Backend::Sequential), get(Backend::ParallelCpu), gpu));
  }
  return table;
}

}  // namespace gemmlab
