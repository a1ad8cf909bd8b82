#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include <json.hpp>

#include "gemmlab/errors.hpp"
#include "gemmlab/report.hpp"

using namespace gemmlab;
using namespace gemmlab::report;

namespace {

std::string fixture(const char* name) {
  return read_text_file(std::filesystem::path(GEMMLAB_TEST_FIXTURES) / name);
}

SpeedupTable two_rows() {
  SpeedupTable t;
  t.rows.push_back(make_speedup_row(128, 2.18, 7.10, 0.26));
  t.rows.push_back(make_speedup_row(256, 20.70, 2.89, 0.40));
  return t;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Catches ParseError and returns its line number, or 0 when nothing threw.
std::size_t parse_error_line(const std::string& text) {
  try {
    parse_csv(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gemmlab_report_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("format_fixed") {
  CHECK(format_fixed(1.0, 2) == "1.00");
  CHECK(format_fixed(592.96713, 2) == "592.97");
  CHECK(format_fixed(393280.52, 4) == "393280.5200");
  CHECK(format_fixed(0.0, 4) == "0.0000");
}

TEST_CASE("csv header is exact") {
  const std::string csv = emit_csv(two_rows());
  CHECK(csv.substr(0, csv.find('\n')) ==
        "Matrix_Size,Sequential_CPU_ms,Parallel_CPU_ms,Parallel_GPU_ms,Speedup_CPU_vs_Seq,Speedup_GPU_vs_CPU,"
        "Speedup_GPU_vs_Seq");
  CHECK(count_lines(csv) == 3);
  CHECK(csv.find('\r') == std::string::npos);
}

TEST_CASE("csv row formatting") {
  SpeedupTable t;
  t.rows.push_back(make_speedup_row(4096, 393280.52, 30332.07, 663.24));
  const std::string csv = emit_csv(t);
  CHECK(csv.find("\n4096x4096,393280.5200,30332.0700,663.2400,12.97x,45.73x,592.97x\n") != std::string::npos);

  SpeedupTable eq;
  eq.rows.push_back(make_speedup_row(8, 5.0, 5.0, std::nullopt));
  CHECK(emit_csv(eq).find("\n8x8,5.0000,5.0000,NA,1.00x,NA,NA\n") != std::string::npos);
}

TEST_CASE("empty table is an error") {
  CHECK_THROWS_AS(emit_csv(SpeedupTable{}), EmptyReport);
  CHECK_THROWS_AS(render_table(SpeedupTable{}), EmptyReport);
}

TEST_CASE("reference table fixture parses and re-emits byte for byte") {
  const std::string text = fixture("table1.csv");
  const auto table = parse_csv(text);
  REQUIRE(table.rows.size() == 7);
  CHECK(table.rows.front().n == 128);
  CHECK(table.rows.back().n == 4096);
  CHECK(*table.rows[0].speedup_cpu_vs_seq == 0.31);
  CHECK(emit_csv(table) == text);
}

TEST_CASE("emit/parse round-trip property") {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> ms(0.01, 500000.0);
  std::bernoulli_distribution absent(0.25);
  for (int trial = 0; trial < 200; ++trial) {
    SpeedupTable t;
    std::size_t n = 1;
    const int rows = 1 + trial % 8;
    for (int r = 0; r < rows; ++r) {
      n += 1 + rng() % 512;
      auto pick = [&]() -> std::optional<double> {
        if (absent(rng)) return std::nullopt;
        return ms(rng);
      };
      const auto seq = pick();
      const auto par = pick();
      const auto gpu = pick();
      t.rows.push_back(make_speedup_row(n, seq, par, gpu));
    }
    const std::string once = emit_csv(t);
    const auto parsed = parse_csv(once);
    REQUIRE(parsed.rows.size() == t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      CHECK(parsed.rows[i].n == t.rows[i].n);
      CHECK(parsed.rows[i].seq_ms.has_value() == t.rows[i].seq_ms.has_value());
      CHECK(parsed.rows[i].speedup_gpu_vs_cpu.has_value() == t.rows[i].speedup_gpu_vs_cpu.has_value());
      if (t.rows[i].seq_ms) CHECK(*parsed.rows[i].seq_ms == doctest::Approx(*t.rows[i].seq_ms).epsilon(1e-6));
    }
    CHECK(emit_csv(parsed) == once);
  }
}

TEST_CASE("parse errors name the line") {
  const std::string header(kCsvHeader);
  CHECK(parse_error_line("Size,Seq\n128x128,1\n") == 1);
  CHECK(parse_error_line("") == 1);
  CHECK(parse_error_line(header + "\n128x128,1.0,1.0,1.0,1.00x,1.00x\n") == 2);
  CHECK(parse_error_line(header + "\n128x128,1.0,1.0,1.0,1.00x,1.00x,1.00x\n128x256,1,1,1,1x,1x,1x\n") == 3);
  CHECK(parse_error_line(header + "\n128x128,1.0,1.0,1.0,1.00,1.00x,1.00x\n") == 2);
  CHECK(parse_error_line(header + "\n128x128,abc,1.0,1.0,1.00x,1.00x,1.00x\n") == 2);
  CHECK(parse_error_line(header + "\n128x128,,1.0,1.0,1.00x,1.00x,1.00x\n") == 2);
  CHECK(parse_error_line(header + "\n256x256,1,1,1,1x,1x,1x\n128x128,1,1,1,1x,1x,1x\n") == 3);

  try {
    parse_csv("Size,Seq\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(std::string(kCsvHeader)) != std::string::npos);
  }
}

TEST_CASE("parse tolerates CRLF and NA") {
  const std::string text = std::string(kCsvHeader) + "\r\n64x64,1.0000,NA,NA,NA,NA,NA\r\n";
  const auto t = parse_csv(text);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0].n == 64);
  CHECK_FALSE(t.rows[0].par_cpu_ms.has_value());
}

TEST_CASE("render_table") {
  const std::string text = render_table(parse_csv(fixture("table1.csv")));
  CHECK(text.find("Execution Times (in milliseconds) and Speedups for Matrix Multiplication") != std::string::npos);
  CHECK(text.find("4096x4096") != std::string::npos);
  CHECK(text.find("592.97x") != std::string::npos);
  CHECK(text.find("0.31x") != std::string::npos);
}

TEST_CASE("figures are deterministic and carry the plotted values") {
  const auto table = parse_csv(fixture("table1.csv"));
  const auto a = render_figures(table);
  const auto b = render_figures(table);
  CHECK(a.execution_time == b.execution_time);
  CHECK(a.speedup_vs_seq == b.speedup_vs_seq);
  CHECK(a.gpu_vs_cpu == b.gpu_vs_cpu);
  for (const auto* svg : {&a.execution_time, &a.speedup_vs_seq, &a.gpu_vs_cpu}) {
    CHECK(svg->find("<svg") != std::string::npos);
    CHECK(svg->find("</svg>") != std::string::npos);
    CHECK(svg->find("4096") != std::string::npos);
  }
  // The sub-1 bar is visible and labelled, and the 1x reference is drawn.
  CHECK(a.speedup_vs_seq.find(">0.31<") != std::string::npos);
  CHECK(a.speedup_vs_seq.find("stroke-dasharray") != std::string::npos);
  CHECK(a.gpu_vs_cpu.find(">45.73x<") != std::string::npos);
  CHECK(a.execution_time.find("log scale") != std::string::npos);
}

TEST_CASE("figures from a table and from its CSV are identical") {
  SpeedupTable t;
  t.rows.push_back(make_speedup_row(128, 2.123456, 0.987654, 0.333333));
  t.rows.push_back(make_speedup_row(256, 17.654321, 3.141592, std::nullopt));
  const auto direct = render_figures(t);
  const auto via_csv = render_figures(parse_csv(emit_csv(t)));
  CHECK(direct.execution_time == via_csv.execution_time);
  CHECK(direct.speedup_vs_seq == via_csv.speedup_vs_seq);
  CHECK(direct.gpu_vs_cpu == via_csv.gpu_vs_cpu);
}

TEST_CASE("figures need two rows") {
  SpeedupTable one;
  one.rows.push_back(make_speedup_row(128, 1.0, 1.0, 1.0));
  CHECK_THROWS_AS(render_figures(one), InsufficientData);
  CHECK_THROWS_AS(render_figures(SpeedupTable{}), InsufficientData);
}

TEST_CASE("emit_figures writes three files") {
  const auto dir = scratch_dir("figs") / "nested";
  const auto paths = emit_figures(two_rows(), dir);
  REQUIRE(paths.size() == 3);
  CHECK(paths[0].filename() == kFigureExecutionTime);
  CHECK(paths[1].filename() == kFigureSpeedupVsSeq);
  CHECK(paths[2].filename() == kFigureGpuVsCpu);
  for (const auto& p : paths) CHECK(std::filesystem::file_size(p) > 0);
  std::filesystem::remove_all(dir.parent_path());
}

TEST_CASE("unwritable figure directory is an IoError") {
  const auto dir = scratch_dir("blocked");
  std::filesystem::create_directories(dir);
  write_text_file(dir / "file", "x");
  CHECK_THROWS_AS(emit_figures(two_rows(), dir / "file" / "sub"), IoError);
  CHECK_THROWS_AS(read_text_file(dir / "missing.csv"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("make_report bundles csv, table and figures") {
  const auto dir = scratch_dir("bundle");
  const auto bundle = make_report(two_rows(), dir);
  CHECK(bundle.csv_text == emit_csv(two_rows()));
  CHECK(bundle.table_text == render_table(two_rows()));
  CHECK(bundle.figure_paths.size() == 3);
  const auto no_figs = make_report(two_rows(), std::nullopt);
  CHECK(no_figs.figure_paths.empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("results json") {
  BenchmarkPlan plan;
  plan.sizes = {16};
  plan.backends = {Backend::Sequential};
  plan.repetitions = 2;
  plan.warmup_runs = 0;
  const auto ms = run_plan(plan);
  gpu::DeviceInfo dev;
  const auto doc = nlohmann::json::parse(results_json(plan, ms, dev));
  CHECK(doc["schema"] == "gemmlab-results");
  CHECK(doc["version"] == kResultsSchemaVersion);
  CHECK(doc["plan"]["seed"] == 42);
  REQUIRE(doc["measurements"].size() == 1);
  CHECK(doc["measurements"][0]["backend"] == "seq");
  CHECK(doc["measurements"][0]["times_ms"].size() == 2);
  CHECK(doc["device"]["available"] == false);
}
