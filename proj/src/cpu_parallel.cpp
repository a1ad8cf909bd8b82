#include "gemmlab/cpu_parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <string>
#include <string_view>
#include <thread>

#include "gemmlab/errors.hpp"

namespace gemmlab {

std::size_t default_worker_count() {
  if (const char* env = std::getenv("GEMMLAB_THREADS"); env != nullptr && *env != '\0') {
    std::string_view text(env);
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || value == 0) {
      throw ConfigError("GEMMLAB_THREADS must be a positive integer, got '" + std::string(text) + "'");
    }
    return value;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

CpuParallelConfig resolve_config(const CpuParallelConfig& cfg, std::size_t n_cols) {
  CpuParallelConfig out = cfg;
  if (out.workers && *out.workers == 0) throw ConfigError("workers must be >= 1");
  if (out.chunk && *out.chunk == 0) throw ConfigError("chunk must be >= 1");
  if (!out.workers) out.workers = default_worker_count();
  if (!out.chunk) out.chunk = n_cols == 0 ? 1 : n_cols;
  return out;
}

void parallel_for_ranges(std::size_t total, const CpuParallelConfig& cfg,
                         const std::function<void(std::size_t, std::size_t)>& fn) {
  if (!cfg.workers || *cfg.workers == 0) throw ConfigError("workers must be >= 1");
  if (!cfg.chunk || *cfg.chunk == 0) throw ConfigError("chunk must be >= 1");
  const std::size_t chunk = *cfg.chunk;
  const auto units = static_cast<long long>((total + chunk - 1) / chunk);
  const int threads = static_cast<int>(*cfg.workers);

  auto run_unit = [&](long long u) {
    const std::size_t begin = static_cast<std::size_t>(u) * chunk;
    const std::size_t end = std::min(begin + chunk, total);
    fn(begin, end);
  };

  if (cfg.schedule == CpuSchedule::Dynamic) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (long long u = 0; u < units; ++u) run_unit(u);
  } else {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (long long u = 0; u < units; ++u) run_unit(u);
  }
}

Matrix matmul_parallel_cpu(const Matrix& a, const Matrix& b, const CpuParallelConfig& cfg) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul_parallel_cpu: A is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     ", B is " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  const CpuParallelConfig resolved = resolve_config(cfg, b.cols());

  const std::size_t inner = a.cols();
  const std::size_t cols = b.cols();
  const float* pa = a.data().data();
  const float* pb = b.data().data();
  Matrix c(a.rows(), cols);
  float* pc = c.data().data();

  parallel_for_ranges(a.rows() * cols, resolved, [=](std::size_t begin, std::size_t end) {
    for (std::size_t e = begin; e < end; ++e) {
      const std::size_t i = e / cols;
      const std::size_t j = e % cols;
      float sum = 0.0f;
      for (std::size_t k = 0; k < inner; ++k) sum += pa[i * inner + k] * pb[k * cols + j];
      pc[e] = sum;
    }
  });
  return c;
}

}  // namespace gemmlab
