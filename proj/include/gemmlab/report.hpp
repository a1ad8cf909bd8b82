#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gemmlab/gpu.hpp"
#include "gemmlab/harness.hpp"

namespace gemmlab::report {

inline constexpr std::string_view kCsvHeader =
    "Matrix_Size,Sequential_CPU_ms,Parallel_CPU_ms,Parallel_GPU_ms,Speedup_CPU_vs_Seq,Speedup_GPU_vs_CPU,"
    "Speedup_GPU_vs_Seq";

inline constexpr int kTimeDecimals = 4;
inline constexpr int kSpeedupDecimals = 2;

// printf("%.*f"), so rounding is round-half-even on the binary value.
std::string format_fixed(double value, int decimals);

// Header line, then one `NxN,...` line per row; absent cells are `NA`.
// Throws EmptyReport for a table without rows.
std::string emit_csv(const SpeedupTable& table);

// Inverse of emit_csv. Speedups are taken from the file, not recomputed.
// Throws ParseError naming the 1-based line.
SpeedupTable parse_csv(std::string_view text);

// Fixed-width text rendering of the same columns.
std::string render_table(const SpeedupTable& table);

// The three figures as SVG documents. Values are first rounded exactly as
// emit_csv writes them, so a table and its CSV round-trip draw the same bytes.
struct FigureSet {
  std::string execution_time;   // time vs size, log10 y
  std::string speedup_vs_seq;   // grouped bars, log10 y
  std::string gpu_vs_cpu;       // line, linear y
};

// Throws InsufficientData for fewer than two rows.
FigureSet render_figures(const SpeedupTable& table);

inline constexpr std::string_view kFigureExecutionTime = "fig1_execution_time.svg";
inline constexpr std::string_view kFigureSpeedupVsSeq = "fig2_speedup_vs_sequential.svg";
inline constexpr std::string_view kFigureGpuVsCpu = "fig3_gpu_vs_cpu_speedup.svg";

// Writes the three files into out_dir (created if needed). Throws IoError.
std::vector<std::filesystem::path> emit_figures(const SpeedupTable& table, const std::filesystem::path& out_dir);

struct ReportBundle {
  std::string csv_text;
  std::string table_text;
  std::vector<std::filesystem::path> figure_paths;
};

ReportBundle make_report(const SpeedupTable& table, const std::optional<std::filesystem::path>& figure_dir);

// Machine-readable sweep dump. Schema "gemmlab-results", version field 1.
inline constexpr int kResultsSchemaVersion = 1;
std::string results_json(const BenchmarkPlan& plan, const std::vector<Measurement>& measurements,
                         const gpu::DeviceInfo& device);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace gemmlab::report
