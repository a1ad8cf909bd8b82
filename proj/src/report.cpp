#include "gemmlab/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gemmlab/errors.hpp"

namespace gemmlab::report {

std::string format_fixed(double value, int decimals) {
  char buf[64];
  const int len = std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  if (len < 0 || static_cast<std::size_t>(len) >= sizeof(buf)) {
    std::string big(static_cast<std::size_t>(std::max(len, 0)) + 1, '\0');
    std::snprintf(big.data(), big.size(), "%.*f", decimals, value);
    big.pop_back();
    return big;
  }
  return std::string(buf, static_cast<std::size_t>(len));
}

namespace {

std::string time_cell(const std::optional<double>& v) { return v ? format_fixed(*v, kTimeDecimals) : "NA"; }
std::string speedup_cell(const std::optional<double>& v) {
  return v ? format_fixed(*v, kSpeedupDecimals) + "x" : "NA";
}
std::string size_cell(std::size_t n) { return std::to_string(n) + "x" + std::to_string(n); }

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_number(const std::string& text, std::size_t line, std::string_view column) {
  if (text.empty()) throw ParseError(line, "empty " + std::string(column) + " (use NA for absent values)");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ParseError(line, "bad " + std::string(column) + " value '" + text + "'");
  }
  return v;
}

std::optional<double> parse_time(const std::string& text, std::size_t line, std::string_view column) {
  if (text == "NA") return std::nullopt;
  const double v = parse_number(text, line, column);
  if (v < 0.0) throw ParseError(line, std::string(column) + " is negative");
  return v;
}

std::optional<double> parse_speedup(const std::string& text, std::size_t line, std::string_view column) {
  if (text == "NA") return std::nullopt;
  if (text.size() < 2 || text.back() != 'x') {
    throw ParseError(line, std::string(column) + " value '" + text + "' lacks the trailing 'x'");
  }
  const double v = parse_number(text.substr(0, text.size() - 1), line, column);
  if (v < 0.0) throw ParseError(line, std::string(column) + " is negative");
  return v;
}

std::size_t parse_size(const std::string& text, std::size_t line) {
  const auto x = text.find('x');
  if (x == std::string::npos || x == 0 || text.substr(0, x) != text.substr(x + 1)) {
    throw ParseError(line, "Matrix_Size '" + text + "' is not of the form NxN");
  }
  const std::string digits = text.substr(0, x);
  if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw ParseError(line, "Matrix_Size '" + text + "' is not of the form NxN");
  }
  const auto n = std::strtoull(digits.c_str(), nullptr, 10);
  if (n == 0) throw ParseError(line, "Matrix_Size must be positive");
  return static_cast<std::size_t>(n);
}

void require_rows(const SpeedupTable& table) {
  if (table.rows.empty()) throw EmptyReport("speedup table has no rows");
}

}  // namespace

std::string emit_csv(const SpeedupTable& table) {
  require_rows(table);
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : table.rows) {
    out += size_cell(r.n) + ',' + time_cell(r.seq_ms) + ',' + time_cell(r.par_cpu_ms) + ',' + time_cell(r.gpu_ms) +
           ',' + speedup_cell(r.speedup_cpu_vs_seq) + ',' + speedup_cell(r.speedup_gpu_vs_cpu) + ',' +
           speedup_cell(r.speedup_gpu_vs_seq) + '\n';
  }
  return out;
}

SpeedupTable parse_csv(std::string_view text) {
  SpeedupTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (!header_seen) {
      if (line != kCsvHeader) {
        throw ParseError(line_no, "unexpected header; expected '" + std::string(kCsvHeader) + "'");
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;

    const auto cells = split(line, ',');
    if (cells.size() != 7) {
      throw ParseError(line_no, "expected 7 columns, found " + std::to_string(cells.size()));
    }
    SpeedupRow row;
    row.n = parse_size(cells[0], line_no);
    row.seq_ms = parse_time(cells[1], line_no, "Sequential_CPU_ms");
    row.par_cpu_ms = parse_time(cells[2], line_no, "Parallel_CPU_ms");
    row.gpu_ms = parse_time(cells[3], line_no, "Parallel_GPU_ms");
    row.speedup_cpu_vs_seq = parse_speedup(cells[4], line_no, "Speedup_CPU_vs_Seq");
    row.speedup_gpu_vs_cpu = parse_speedup(cells[5], line_no, "Speedup_GPU_vs_CPU");
    row.speedup_gpu_vs_seq = parse_speedup(cells[6], line_no, "Speedup_GPU_vs_Seq");
    if (!table.rows.empty() && row.n <= table.rows.back().n) {
      throw ParseError(line_no, "matrix sizes must be strictly increasing");
    }
    table.rows.push_back(row);
  }
  if (!header_seen) throw ParseError(1, "empty file; expected header '" + std::string(kCsvHeader) + "'");
  return table;
}

std::string render_table(const SpeedupTable& table) {
  require_rows(table);
  const std::vector<std::string> headers = {"Matrix Size (N x N)", "Seq. CPU (ms)",    "Par. CPU (ms)",
                                            "Par. GPU (ms)",       "Par. CPU vs Seq.", "GPU vs Par. CPU",
                                            "GPU vs Seq."};
  std::vector<std::vector<std::string>> body;
  for (const auto& r : table.rows) {
    body.push_back({size_cell(r.n), time_cell(r.seq_ms), time_cell(r.par_cpu_ms), time_cell(r.gpu_ms),
                    speedup_cell(r.speedup_cpu_vs_seq), speedup_cell(r.speedup_gpu_vs_cpu),
                    speedup_cell(r.speedup_gpu_vs_seq)});
  }
  std::vector<std::size_t> width(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    width[c] = headers[c].size();
    for (const auto& row : body) width[c] = std::max(width[c], row[c].size());
  }

  auto emit_row = [&](const std::vector<std::string>& cells, std::string& out) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) out += "  ";
      const std::string pad(width[c] - cells[c].size(), ' ');
      // Size column left-aligned, numbers right-aligned.
      out += c == 0 ? cells[c] + pad : pad + cells[c];
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  };

  std::string out = "Execution Times (in milliseconds) and Speedups for Matrix Multiplication\n";
  emit_row(headers, out);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + '\n';
  for (const auto& row : body) emit_row(row, out);
  return out;
}

ReportBundle make_report(const SpeedupTable& table, const std::optional<std::filesystem::path>& figure_dir) {
  ReportBundle bundle;
  bundle.csv_text = emit_csv(table);
  bundle.table_text = render_table(table);
  if (figure_dir) bundle.figure_paths = emit_figures(table, *figure_dir);
  return bundle;
}

std::string results_json(const BenchmarkPlan& plan, const std::vector<Measurement>& measurements,
                         const gpu::DeviceInfo& device) {
  using nlohmann::json;
  json doc;
  doc["schema"] = "gemmlab-results";
  doc["version"] = kResultsSchemaVersion;

  json p;
  p["sizes"] = plan.sizes;
  p["seed"] = plan.seed;
  p["repetitions"] = plan.repetitions;
  p["warmup_runs"] = plan.warmup_runs;
  json backends = json::array();
  for (Backend b : plan.backends) backends.push_back(std::string(to_string(b)));
  p["backends"] = backends;
  p["timing_scope"] = std::string(gpu::to_string(plan.timing_scope));
  p["max_sequential_size"] = plan.max_sequential_size ? json(*plan.max_sequential_size) : json(nullptr);
  p["verify_max_size"] = plan.verify_max_size;
  p["threads"] = plan.cpu.workers ? json(*plan.cpu.workers) : json(nullptr);
  doc["plan"] = p;

  json d;
  d["available"] = device.available;
  if (device.available) {
    d["name"] = device.name;
    d["backend"] = device.backend;
    d["adapter_type"] = device.adapter_type;
    d["dedicated_memory_bytes"] = device.dedicated_memory_bytes;
    d["max_workgroup_size"] = device.max_workgroup_size;
    d["max_buffer_bytes"] = device.max_buffer_bytes;
  }
  doc["device"] = d;

  json ms = json::array();
  for (const auto& m : measurements) {
    json j;
    j["backend"] = std::string(to_string(m.backend));
    j["n"] = m.n;
    j["status"] = std::string(to_string(m.status));
    j["times_ms"] = m.times_ms;
    if (m.status == CellStatus::Ok) {
      j["median_ms"] = m.median_ms;
      j["min_ms"] = m.min_ms;
    }
    j["verified"] = m.verified;
    if (m.check) {
      j["max_abs_diff"] = m.check->max_abs_diff;
      j["max_rel_diff"] = m.check->max_rel_diff;
    }
    if (m.gpu_phases) {
      j["gpu_phases"] = {{"alloc_ms", m.gpu_phases->alloc_ms},   {"h2d_ms", m.gpu_phases->h2d_ms},
                         {"kernel_ms", m.gpu_phases->kernel_ms}, {"d2h_ms", m.gpu_phases->d2h_ms},
                         {"total_ms", m.gpu_phases->total_ms}};
    }
    if (!m.note.empty()) j["note"] = m.note;
    ms.push_back(std::move(j));
  }
  doc["measurements"] = ms;
  return doc.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write to " + path.string() + " failed");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace gemmlab::report
