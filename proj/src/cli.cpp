#include "gemmlab/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "gemmlab/errors.hpp"
#include "gemmlab/gpu.hpp"
#include "gemmlab/report.hpp"

namespace gemmlab::cli {

namespace {

std::vector<std::string_view> split_commas(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(',', start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::size_t parse_count(std::string_view text, std::string_view what) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::vector<std::size_t> parse_sizes(std::string_view text) {
  std::set<std::size_t> sizes;
  for (std::string_view item : split_commas(text)) {
    if (item.find(':') == std::string_view::npos) {
      const std::size_t n = parse_count(item, "size");
      if (n == 0) throw ConfigError("sizes must be positive");
      sizes.insert(n);
      continue;
    }
    const auto c1 = item.find(':');
    const auto c2 = item.find(':', c1 + 1);
    if (c2 == std::string_view::npos || item.size() <= c2 + 2 || item[c2 + 1] != 'x') {
      throw ConfigError("bad size range '" + std::string(item) + "' (expected MIN:MAX:xFACTOR)");
    }
    const std::size_t lo = parse_count(item.substr(0, c1), "range start");
    const std::size_t hi = parse_count(item.substr(c1 + 1, c2 - c1 - 1), "range end");
    const std::size_t factor = parse_count(item.substr(c2 + 2), "range factor");
    if (lo == 0 || hi < lo || factor < 2) {
      throw ConfigError("bad size range '" + std::string(item) + "' (need 1 <= MIN <= MAX and factor >= 2)");
    }
    for (std::size_t n = lo; n <= hi; n *= factor) {
      sizes.insert(n);
      if (n > hi / factor) break;
    }
  }
  return {sizes.begin(), sizes.end()};
}

std::vector<Backend> parse_backends(std::string_view text) {
  if (text == "all") return {std::begin(kAllBackends), std::end(kAllBackends)};
  std::vector<Backend> out;
  for (std::string_view item : split_commas(text)) {
    const Backend b = parse_backend(item);
    if (std::find(out.begin(), out.end(), b) != out.end()) {
      throw ConfigError("backend '" + std::string(item) + "' listed twice");
    }
    out.push_back(b);
  }
  return out;
}

namespace {

constexpr const char* kDefaultSizes = "128,256,512,1024,2048,3072,4096";
constexpr const char* kDefaultBenchBackends = "seq,cpu,gpu-tiled";
constexpr const char* kDefaultVerifySizes = "64,128,256,257";

struct BenchFlags {
  std::string sizes = kDefaultSizes;
  std::uint64_t seed = 42;
  std::size_t reps = 3;
  std::size_t warmup = 1;
  std::string backends = kDefaultBenchBackends;
  bool cpu_only = false;
  std::string timing_scope = "transfers+kernel";
  std::optional<std::size_t> max_seq_size;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> chunk;
  std::string schedule = "static";
  std::size_t verify_max_size = 1024;
  std::string output = "-";
  std::string figures;
  std::string results;
  bool table = false;
  bool quiet = false;
};

struct VerifyFlags {
  std::string sizes = kDefaultVerifySizes;
  std::uint64_t seed = 42;
  std::string backends = "all";
  bool cpu_only = false;
};

struct PlotFlags {
  std::string input;
  std::string figures = "figures";
};

BenchmarkPlan build_plan(const BenchFlags& f) {
  BenchmarkPlan plan;
  plan.sizes = parse_sizes(f.sizes);
  plan.seed = f.seed;
  plan.repetitions = f.reps;
  plan.warmup_runs = f.warmup;
  plan.backends = f.cpu_only ? std::vector<Backend>{Backend::Sequential, Backend::ParallelCpu}
                             : parse_backends(f.backends);
  plan.timing_scope = gpu::parse_timing_scope(f.timing_scope);
  plan.max_sequential_size = f.max_seq_size;
  plan.verify_max_size = f.verify_max_size;
  plan.cpu.workers = f.threads;
  plan.cpu.chunk = f.chunk;
  if (f.schedule == "static") {
    plan.cpu.schedule = CpuSchedule::Static;
  } else if (f.schedule == "dynamic") {
    plan.cpu.schedule = CpuSchedule::Dynamic;
  } else {
    throw ConfigError("bad schedule '" + f.schedule + "' (expected static or dynamic)");
  }
  validate(plan);
  // Surface a bad GEMMLAB_THREADS before the sweep starts.
  if (!plan.cpu.workers) default_worker_count();
  return plan;
}

void write_output(const std::string& target, const std::string& text, std::ostream& out) {
  if (target == "-") {
    out << text;
    out.flush();
  } else {
    report::write_text_file(target, text);
  }
}

int cmd_bench(const BenchFlags& f, std::ostream& out, std::ostream& err, const RunOptions& hooks) {
  const BenchmarkPlan plan = build_plan(f);

  RunOptions options = hooks;
  options.log = f.quiet ? nullptr : &err;
  std::optional<gpu::GpuContext> gpu;
  gpu::DeviceInfo device;
  const bool wants_gpu = std::any_of(plan.backends.begin(), plan.backends.end(), is_gpu);
  if (options.gpu != nullptr) {
    device = options.gpu->info();
  } else if (wants_gpu) {
    std::string why;
    gpu = gpu::GpuContext::open_default(&why);
    if (gpu) {
      options.gpu = &*gpu;
      device = gpu->info();
    } else {
      err << "warning: no GPU device (" << why << "); GPU backends will be reported as NA\n";
    }
  }

  const auto measurements = run_plan(plan, options);
  const SpeedupTable table = compute_speedups(measurements);
  const auto bundle = report::make_report(
      table, f.figures.empty() ? std::nullopt : std::optional<std::filesystem::path>(f.figures));
  write_output(f.output, bundle.csv_text, out);
  if (f.table) err << bundle.table_text;
  if (!f.results.empty()) report::write_text_file(f.results, report::results_json(plan, measurements, device));

  bool failed = false;
  for (const auto& m : measurements) {
    if (m.status == CellStatus::Failed) {
      err << "FAILED " << to_string(m.backend) << " n=" << m.n << ": " << m.note << "\n";
      failed = true;
    }
  }
  return failed ? kExitFailure : kExitOk;
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(3) << v;
  return s.str();
}

int cmd_verify(const VerifyFlags& f, std::ostream& out, std::ostream& err, const RunOptions& hooks) {
  const auto sizes = parse_sizes(f.sizes);
  const auto backends = f.cpu_only ? std::vector<Backend>{Backend::Sequential, Backend::ParallelCpu}
                                   : parse_backends(f.backends);
  const auto cells = run_verification(sizes, f.seed, backends, hooks);

  std::map<std::pair<std::size_t, Backend>, const VerifyCell*> index;
  for (const auto& c : cells) index[{c.n, c.backend}] = &c;

  auto emit = [&out](const std::vector<std::string>& cells) {
    std::ostringstream line;
    line << std::left;
    for (std::size_t i = 0; i < cells.size(); ++i) line << std::setw(i == 0 ? 8 : 12) << cells[i];
    std::string text = line.str();
    text.erase(text.find_last_not_of(' ') + 1);
    out << text << "\n";
  };
  std::vector<std::string> header{"n"};
  for (Backend b : backends) header.emplace_back(to_string(b));
  emit(header);
  for (std::size_t n : sizes) {
    std::vector<std::string> row{std::to_string(n)};
    for (Backend b : backends) {
      const VerifyCell& c = *index.at({n, b});
      row.emplace_back(c.status == CellStatus::Skipped ? "SKIP" : (c.pass ? "PASS" : "FAIL"));
    }
    emit(row);
  }

  bool failed = false;
  for (const auto& c : cells) {
    if (c.status == CellStatus::Skipped) continue;
    if (!c.pass) {
      failed = true;
      err << "FAIL " << to_string(c.backend) << " n=" << c.n;
      if (!c.note.empty()) {
        err << ": " << c.note << "\n";
      } else {
        err << ": max_abs_diff=" << sci(c.report.max_abs_diff) << " max_rel_diff=" << sci(c.report.max_rel_diff)
            << " worst_index=(" << c.report.worst_index.first << "," << c.report.worst_index.second << ")"
            << (is_gpu(c.backend) ? " tolerance=" + sci(c.tolerance) + " rel" : std::string(" (bitwise required)"))
            << "\n";
      }
    }
  }
  const auto skipped = std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.status == CellStatus::Skipped; });
  if (skipped > 0) err << "note: " << skipped << " cell(s) skipped (no GPU device)\n";
  return failed ? kExitFailure : kExitOk;
}

int cmd_plot(const PlotFlags& f, std::ostream& out) {
  const std::string text = report::read_text_file(f.input);
  const SpeedupTable table = report::parse_csv(text);
  const auto paths = report::emit_figures(table, f.figures);
  for (const auto& p : paths) out << p.string() << "\n";
  return kExitOk;
}

int cmd_devices(std::ostream& out) {
  std::string why;
  std::optional<gpu::GpuContext> ctx;
  if (gpu::gpu_disabled_by_env()) {
    why = "disabled by GEMMLAB_NO_GPU";
  } else {
    try {
      auto backend = gpu::open_wgpu_backend(&why);
      if (backend) {
        const gpu::DeviceInfo info = backend->info();
        out << "GPU device: " << info.name << "\n";
        out << "  backend:            " << info.backend << "\n";
        out << "  adapter type:       " << info.adapter_type << "\n";
        out << "  dedicated memory:   "
            << (info.dedicated_memory_bytes ? std::to_string(info.dedicated_memory_bytes / (1024 * 1024)) + " MiB"
                                            : std::string("unknown"))
            << "\n";
        out << "  max buffer size:    " << info.max_buffer_bytes / (1024 * 1024) << " MiB\n";
        out << "  max workgroup size: " << info.max_workgroup_size << "\n";
        return kExitOk;
      }
    } catch (const std::exception& e) {
      why = e.what();
    }
  }
  out << "no GPU device";
  if (!why.empty()) out << " (" << why << ")";
  out << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const RunOptions& hooks) {
  CLI::App app{"Dense matrix-multiplication benchmark laboratory: sequential, multithreaded CPU and GPU backends.",
               "gemmlab"};
  app.footer(
      "Environment:\n"
      "  GEMMLAB_THREADS       default worker count for the parallel CPU backend\n"
      "  GEMMLAB_NO_GPU=1      treat the machine as having no GPU\n"
      "  GEMMLAB_SHADER_DIR    directory holding matmul_naive.wgsl and matmul_tiled.wgsl\n"
      "  GEMMLAB_WGPU_LIBRARY  path to the wgpu-native shared library\n"
      "  GEMMLAB_ALLOW_CPU_ADAPTER=1  accept a software (CPU) WebGPU adapter");
  app.require_subcommand(1);

  BenchFlags bench;
  auto* b = app.add_subcommand("bench", "Run the benchmark sweep and write CSV results");
  b->add_option("--sizes", bench.sizes, "Matrix sizes: comma list and/or MIN:MAX:xFACTOR ranges")
      ->capture_default_str();
  b->add_option("--seed", bench.seed, "Seed for A; B uses seed+1")->capture_default_str();
  b->add_option("--reps", bench.reps, "Timed repetitions per cell (median reported)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  b->add_option("--warmup", bench.warmup, "Untimed warmup runs per cell")->capture_default_str();
  auto* bench_backends =
      b->add_option("--backends", bench.backends, "Comma list of seq, cpu, gpu-naive, gpu-tiled, or all")
          ->capture_default_str();
  b->add_flag("--cpu-only", bench.cpu_only, "Shorthand for --backends seq,cpu")->excludes(bench_backends);
  b->add_option("--timing-scope", bench.timing_scope,
                "GPU phases inside the timed interval: transfers+kernel, alloc+transfers+kernel, kernel")
      ->capture_default_str();
  b->add_option("--max-seq-size", bench.max_seq_size, "Skip the sequential backend above this size (default: no cap)");
  b->add_option("--threads", bench.threads,
                "Parallel CPU worker count (default: GEMMLAB_THREADS, else hardware threads)")
      ->check(CLI::PositiveNumber);
  b->add_option("--chunk", bench.chunk, "Output elements per parallel work unit (default: one row)")
      ->check(CLI::PositiveNumber);
  b->add_option("--schedule", bench.schedule, "Parallel CPU schedule: static or dynamic")->capture_default_str();
  b->add_option("--verify-max-size", bench.verify_max_size, "Check results against the sequential oracle up to this size")
      ->capture_default_str();
  b->add_option("--output", bench.output, "CSV destination, - for stdout")->capture_default_str();
  b->add_option("--figures", bench.figures, "Also write the three SVG figures into this directory");
  b->add_option("--results", bench.results, "Also write a JSON results dump to this file");
  b->add_flag("--table", bench.table, "Print an aligned table to stderr");
  b->add_flag("--quiet", bench.quiet, "Suppress progress messages");

  VerifyFlags verify;
  auto* v = app.add_subcommand("verify", "Check every available backend against the sequential oracle");
  v->add_option("--sizes", verify.sizes, "Matrix sizes: comma list and/or MIN:MAX:xFACTOR ranges")
      ->capture_default_str();
  v->add_option("--seed", verify.seed, "Seed for A; B uses seed+1")->capture_default_str();
  auto* verify_backends =
      v->add_option("--backends", verify.backends, "Comma list of seq, cpu, gpu-naive, gpu-tiled, or all")
          ->capture_default_str();
  v->add_flag("--cpu-only", verify.cpu_only, "Shorthand for --backends seq,cpu")->excludes(verify_backends);

  PlotFlags plot;
  auto* p = app.add_subcommand("plot", "Regenerate the SVG figures from a saved CSV");
  p->add_option("--input", plot.input, "CSV written by bench")->required();
  p->add_option("--figures", plot.figures, "Output directory for the figures")->capture_default_str();

  auto* d = app.add_subcommand("devices", "Describe the GPU compute device, if any");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*b) return cmd_bench(bench, out, err, hooks);
    if (*v) return cmd_verify(verify, out, err, hooks);
    if (*p) return cmd_plot(plot, out);
    if (*d) return cmd_devices(out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace gemmlab::cli
