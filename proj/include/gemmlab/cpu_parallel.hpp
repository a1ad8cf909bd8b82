#pragma once

#include <cstddef>
#include <functional>
#include <optional>

#include "gemmlab/matrix.hpp"

namespace gemmlab {

enum class CpuSchedule { Static, Dynamic };

struct CpuParallelConfig {
  // Unset: GEMMLAB_THREADS if present, else hardware threads.
  std::optional<std::size_t> workers;
  // Output elements per work unit. Unset: one row (n elements).
  std::optional<std::size_t> chunk;
  CpuSchedule schedule = CpuSchedule::Static;
};

// Worker count used when CpuParallelConfig::workers is 0. Reads GEMMLAB_THREADS
// (same meaning as OMP_NUM_THREADS); malformed or zero values are a ConfigError.
std::size_t default_worker_count();

// Fills unset fields. Throws ConfigError for an explicit zero worker count or
// chunk, or for an unusable GEMMLAB_THREADS value.
CpuParallelConfig resolve_config(const CpuParallelConfig& cfg, std::size_t n_cols);

// Runs fn(begin, end) over contiguous ranges covering [0, total) exactly once,
// spread across cfg.workers threads. Ranges are cfg.chunk long except the last.
// cfg must be resolved.
void parallel_for_ranges(std::size_t total, const CpuParallelConfig& cfg,
                         const std::function<void(std::size_t, std::size_t)>& fn);

// C = A x B with the flattened (i, j) space split into work units. Each
// element uses the same k-ordered float loop as matmul_sequential, so the
// result is bitwise identical to it for any worker count or schedule.
Matrix matmul_parallel_cpu(const Matrix& a, const Matrix& b, const CpuParallelConfig& cfg = {});

}  // namespace gemmlab
