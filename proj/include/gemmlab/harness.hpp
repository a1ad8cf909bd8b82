#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gemmlab/cpu_parallel.hpp"
#include "gemmlab/gpu.hpp"
#include "gemmlab/matrix.hpp"

namespace gemmlab {

enum class Backend { Sequential, ParallelCpu, GpuNaive, GpuTiled };

inline constexpr Backend kAllBackends[] = {Backend::Sequential, Backend::ParallelCpu, Backend::GpuNaive,
                                           Backend::GpuTiled};

// CLI spellings: seq, cpu, gpu-naive, gpu-tiled.
std::string_view to_string(Backend backend) noexcept;
Backend parse_backend(std::string_view text);
bool is_gpu(Backend backend) noexcept;

struct BenchmarkPlan {
  std::vector<std::size_t> sizes{128, 256, 512, 1024, 2048, 3072, 4096};
  std::uint64_t seed = 42;
  std::size_t repetitions = 3;
  std::size_t warmup_runs = 1;
  std::vector<Backend> backends{Backend::Sequential, Backend::ParallelCpu, Backend::GpuTiled};
  gpu::TimingScope timing_scope = gpu::TimingScope::TransfersAndKernel;
  std::optional<std::size_t> max_sequential_size;
  // Results are checked against matmul_sequential for n <= this cap.
  std::size_t verify_max_size = 1024;
  CpuParallelConfig cpu;
};

// Throws ConfigError when the plan violates its invariants.
void validate(const BenchmarkPlan& plan);

enum class CellStatus { Ok, Skipped, Failed };
std::string_view to_string(CellStatus status) noexcept;

struct Measurement {
  Backend backend = Backend::Sequential;
  std::size_t n = 0;
  CellStatus status = CellStatus::Ok;
  std::vector<double> times_ms;
  double median_ms = 0.0;
  double min_ms = 0.0;
  // Phases of the repetition whose total is closest to the median.
  std::optional<gpu::GpuTiming> gpu_phases;
  bool verified = false;
  std::optional<ComparisonReport> check;
  // Fingerprints of the A and B inputs the backend received.
  std::uint64_t input_a_hash = 0;
  std::uint64_t input_b_hash = 0;
  // Skip/failure reason.
  std::string note;
};

double median(std::vector<double> values);

using KernelFn = std::function<Matrix(const Matrix&, const Matrix&)>;

struct RunOptions {
  // Used for GPU backends; opened on demand when null.
  gpu::GpuContext* gpu = nullptr;
  // Replaces a backend's kernel (fault injection, custom backends).
  std::map<Backend, KernelFn> kernel_overrides;
  // Warnings and progress; nullptr silences them.
  std::ostream* log = nullptr;
};

// Runs every (size, backend) cell serially. Inputs are random_matrix(n, seed)
// and random_matrix(n, seed + 1). Missing GPU devices yield Skipped cells;
// backend errors yield Failed cells and the sweep continues.
std::vector<Measurement> run_plan(const BenchmarkPlan& plan, const RunOptions& options = {});

// Absolute equality is required for CPU backends; GPU backends accept
// max_rel_diff <= kGpuRelTolerance.
inline constexpr double kGpuRelTolerance = 1e-3;

struct VerifyCell {
  Backend backend = Backend::Sequential;
  std::size_t n = 0;
  CellStatus status = CellStatus::Ok;
  bool pass = false;
  ComparisonReport report;
  double tolerance = 0.0;
  std::string note;
};

// Compares each backend's output against matmul_sequential on the same inputs.
std::vector<VerifyCell> run_verification(const std::vector<std::size_t>& sizes, std::uint64_t seed,
                                         const std::vector<Backend>& backends, const RunOptions& options = {});

struct SpeedupRow {
  std::size_t n = 0;
  std::optional<double> seq_ms;
  std::optional<double> par_cpu_ms;
  std::optional<double> gpu_ms;
  std::optional<double> speedup_cpu_vs_seq;
  std::optional<double> speedup_gpu_vs_cpu;
  std::optional<double> speedup_gpu_vs_seq;
};

struct SpeedupTable {
  std::vector<SpeedupRow> rows;
};

// S = numerator / denominator for every pair that is present. Throws
// MeasurementCorrupt on zero, negative, or non-finite timings.
SpeedupRow make_speedup_row(std::size_t n, std::optional<double> seq_ms, std::optional<double> par_cpu_ms,
                            std::optional<double> gpu_ms);

// Rows ordered by n from the medians of Ok cells. The GPU column takes the
// tiled kernel when both GPU variants ran.
SpeedupTable compute_speedups(const std::vector<Measurement>& measurements);

}  // namespace gemmlab
