#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>
#include <vector>

#include "gemmlab/cpu_parallel.hpp"
#include "gemmlab/errors.hpp"
#include "support/env.hpp"

using namespace gemmlab;

namespace {

using testing::EnvGuard;

CpuParallelConfig config(std::size_t workers, std::optional<std::size_t> chunk = std::nullopt,
                         CpuSchedule schedule = CpuSchedule::Static) {
  CpuParallelConfig cfg;
  cfg.workers = workers;
  cfg.chunk = chunk;
  cfg.schedule = schedule;
  return cfg;
}

}  // namespace

TEST_CASE("parallel CPU is bitwise identical to sequential (N=256, 8 workers)") {
  const Matrix a = random_matrix(256, 1);
  const Matrix b = random_matrix(256, 2);
  CHECK(matmul_parallel_cpu(a, b, config(8)).bitwise_equal(matmul_sequential(a, b)));
}

TEST_CASE("property: bitwise identity across workers, chunks and schedules") {
  for (std::size_t n : {1u, 5u, 16u, 37u, 64u}) {
    const Matrix a = random_matrix(n, n);
    const Matrix b = random_matrix(n, n + 1);
    const Matrix expected = matmul_sequential(a, b);
    for (std::size_t workers : {1u, 2u, 3u, 8u}) {
      for (std::size_t chunk : {1u, 7u, 64u, 10000u}) {
        for (auto schedule : {CpuSchedule::Static, CpuSchedule::Dynamic}) {
          REQUIRE(matmul_parallel_cpu(a, b, config(workers, chunk, schedule)).bitwise_equal(expected));
        }
      }
    }
  }
}

TEST_CASE("rectangular inputs follow the same contract") {
  const Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
  const Matrix b(3, 2, {1, 0, 0, 1, 1, 1});
  CHECK(matmul_parallel_cpu(a, b, config(2)).bitwise_equal(matmul_sequential(a, b)));
}

TEST_CASE("every output element is written by exactly one work unit") {
  for (std::size_t total : {1u, 100u, 4096u, 4097u}) {
    for (std::size_t chunk : {1u, 64u, 1000u}) {
      for (auto schedule : {CpuSchedule::Static, CpuSchedule::Dynamic}) {
        std::vector<std::atomic<int>> writes(total);
        std::atomic<std::size_t> units{0};
        parallel_for_ranges(total, config(4, chunk, schedule), [&](std::size_t begin, std::size_t end) {
          REQUIRE(end > begin);
          REQUIRE(end - begin <= chunk);
          ++units;
          for (std::size_t e = begin; e < end; ++e) writes[e].fetch_add(1);
        });
        for (const auto& w : writes) REQUIRE(w.load() == 1);
        CHECK(units.load() == (total + chunk - 1) / chunk);
      }
    }
  }
}

TEST_CASE("single worker performs n^3 multiply-adds over n^2 units") {
  const std::size_t n = 24;
  std::size_t elements = 0;
  std::size_t units = 0;
  parallel_for_ranges(n * n, resolve_config(config(1), n), [&](std::size_t begin, std::size_t end) {
    ++units;
    elements += end - begin;
  });
  CHECK(units == n);  // default chunk is one row
  CHECK(elements * n == n * n * n);
}

TEST_CASE("config validation") {
  const Matrix a = random_matrix(4, 1);
  CHECK_THROWS_AS(matmul_parallel_cpu(a, a, config(0)), ConfigError);
  CHECK_THROWS_AS(matmul_parallel_cpu(a, a, config(2, 0)), ConfigError);
  CHECK_THROWS_AS(matmul_parallel_cpu(Matrix(2, 3), Matrix(2, 3), config(2)), ShapeError);
  CHECK_THROWS_AS(parallel_for_ranges(10, CpuParallelConfig{}, [](std::size_t, std::size_t) {}), ConfigError);
}

TEST_CASE("GEMMLAB_THREADS sets the default worker count") {
  {
    EnvGuard env("GEMMLAB_THREADS", "3");
    CHECK(default_worker_count() == 3);
    CHECK(*resolve_config({}, 10).workers == 3);
    CHECK(*resolve_config({}, 10).chunk == 10);
  }
  {
    EnvGuard env("GEMMLAB_THREADS", "zero");
    CHECK_THROWS_AS(default_worker_count(), ConfigError);
  }
  {
    EnvGuard env("GEMMLAB_THREADS", "0");
    CHECK_THROWS_AS(default_worker_count(), ConfigError);
  }
  {
    EnvGuard env("GEMMLAB_THREADS", nullptr);
    CHECK(default_worker_count() >= 1);
  }
}

TEST_CASE("one worker costs about the same as sequential") {
  const Matrix a = random_matrix(192, 5);
  const Matrix b = random_matrix(192, 6);
  using clock = std::chrono::steady_clock;
  auto time = [](auto&& fn) {
    double best = 1e300;
    for (int r = 0; r < 3; ++r) {
      const auto t0 = clock::now();
      fn();
      best = std::min(best, std::chrono::duration<double, std::milli>(clock::now() - t0).count());
    }
    return best;
  };
  const double seq = time([&] { (void)matmul_sequential(a, b); });
  const double par = time([&] { (void)matmul_parallel_cpu(a, b, config(1)); });
  CHECK(par < 2.0 * seq + 1.0);
}

TEST_CASE("concurrent calls on distinct outputs are safe") {
  const Matrix a = random_matrix(48, 8);
  const Matrix b = random_matrix(48, 9);
  const Matrix expected = matmul_sequential(a, b);
  std::vector<Matrix> results(4, Matrix(1, 1));
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < results.size(); ++t) {
    threads.emplace_back([&, t] { results[t] = matmul_parallel_cpu(a, b, config(2)); });
  }
  for (auto& t : threads) t.join();
  for (const auto& r : results) CHECK(r.bitwise_equal(expected));
}
