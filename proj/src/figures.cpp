// SVG rendering of the three result figures. Output depends only on the
// table contents: no timestamps, ids, or locale-dependent formatting.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <system_error>
#include <vector>

#include "gemmlab/errors.hpp"
#include "gemmlab/report.hpp"

namespace gemmlab::report {
namespace {

constexpr double kWidth = 800;
constexpr double kHeight = 500;
constexpr double kLeft = 90;
constexpr double kRight = 190;
constexpr double kTop = 60;
constexpr double kBottom = 70;
constexpr double kPlotW = kWidth - kLeft - kRight;
constexpr double kPlotH = kHeight - kTop - kBottom;

struct Series {
  std::string label;
  std::string color;
  std::vector<std::optional<double>> values;  // one per row
};

const char* kSeqColor = "#1f77b4";
const char* kCpuColor = "#ff7f0e";
const char* kGpuColor = "#2ca02c";

std::string num(double v) { return format_fixed(v, 2); }

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

class Svg {
 public:
  Svg() {
    out_ += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(kWidth) + "\" height=\"" +
            num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
    out_ += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) + "\" fill=\"white\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1.0,
            std::string_view dash = {}) {
    out_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
            "\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"" + num(width) + "\"";
    if (!dash.empty()) out_ += " stroke-dasharray=\"" + std::string(dash) + "\"";
    out_ += "/>\n";
  }

  void rect(double x, double y, double w, double h, std::string_view fill) {
    out_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
            "\" fill=\"" + std::string(fill) + "\"/>\n";
  }

  void circle(double cx, double cy, double r, std::string_view fill) {
    out_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) + "\" fill=\"" +
            std::string(fill) + "\"/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, std::string_view stroke) {
    if (pts.size() < 2) return;
    out_ += "<polyline fill=\"none\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"2.00\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i > 0) out_ += ' ';
      out_ += num(pts[i].first) + ',' + num(pts[i].second);
    }
    out_ += "\"/>\n";
  }

  void text(double x, double y, std::string_view content, std::string_view anchor = "middle", double size = 12,
            std::string_view extra = {}) {
    out_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"" + num(size) +
            "\" text-anchor=\"" + std::string(anchor) + "\"";
    if (!extra.empty()) out_ += " " + std::string(extra);
    out_ += ">" + escape(content) + "</text>\n";
  }

  std::string finish() {
    out_ += "</svg>\n";
    return std::move(out_);
  }

 private:
  std::string out_;
};

// Maps a data value to a pixel row.
struct YAxis {
  bool log = false;
  double lo = 0;
  double hi = 1;

  double to_px(double v) const {
    double t;
    if (log) {
      t = (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo));
    } else {
      t = (v - lo) / (hi - lo);
    }
    return kTop + kPlotH * (1.0 - t);
  }
};

YAxis log_axis(const std::vector<Series>& series) {
  double lo = HUGE_VAL;
  double hi = 0;
  for (const auto& s : series) {
    for (const auto& v : s.values) {
      if (v && *v > 0) {
        lo = std::min(lo, *v);
        hi = std::max(hi, *v);
      }
    }
  }
  if (hi == 0) return {true, 0.1, 10};
  return {true, lo / 2, hi * 2};
}

YAxis linear_axis(const std::vector<Series>& series) {
  double hi = 0;
  for (const auto& s : series) {
    for (const auto& v : s.values) {
      if (v) hi = std::max(hi, *v);
    }
  }
  return {false, 0, hi > 0 ? hi * 1.1 : 1.0};
}

std::string tick_label(double v) {
  if (v >= 1) return format_fixed(v, 0);
  // 0.1, 0.01, ...
  int decimals = static_cast<int>(std::ceil(-std::log10(v) - 1e-9));
  return format_fixed(v, decimals);
}

void draw_frame(Svg& svg, const std::string& title, const std::string& ylabel, const YAxis& axis,
                const std::vector<std::size_t>& sizes) {
  svg.text(kLeft + kPlotW / 2, 30, title, "middle", 16, "font-weight=\"bold\"");

  // Gridlines and y ticks.
  if (axis.log) {
    const int first = static_cast<int>(std::ceil(std::log10(axis.lo) - 1e-12));
    const int last = static_cast<int>(std::floor(std::log10(axis.hi) + 1e-12));
    for (int e = first; e <= last; ++e) {
      const double v = std::pow(10.0, e);
      const double y = axis.to_px(v);
      svg.line(kLeft, y, kLeft + kPlotW, y, "#dddddd");
      svg.text(kLeft - 8, y + 4, tick_label(v), "end", 11);
    }
  } else {
    const double raw = axis.hi / 5;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    }
    for (double v = 0; v <= axis.hi + 1e-9; v += step) {
      const double y = axis.to_px(v);
      svg.line(kLeft, y, kLeft + kPlotW, y, "#dddddd");
      svg.text(kLeft - 8, y + 4, step >= 1 ? format_fixed(v, 0) : format_fixed(v, 1), "end", 11);
    }
  }

  svg.line(kLeft, kTop, kLeft, kTop + kPlotH, "black");
  svg.line(kLeft, kTop + kPlotH, kLeft + kPlotW, kTop + kPlotH, "black");

  const double slot = kPlotW / static_cast<double>(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double x = kLeft + slot * (static_cast<double>(i) + 0.5);
    svg.line(x, kTop + kPlotH, x, kTop + kPlotH + 5, "black");
    svg.text(x, kTop + kPlotH + 20, std::to_string(sizes[i]) + "x" + std::to_string(sizes[i]), "middle", 11);
  }
  svg.text(kLeft + kPlotW / 2, kHeight - 20, "Matrix Size (N x N)", "middle", 13);
  const double ymid = kTop + kPlotH / 2;
  svg.text(25, ymid, ylabel, "middle", 13, "transform=\"rotate(-90 25.00 " + num(ymid) + ")\"");
}

void draw_legend(Svg& svg, const std::vector<Series>& series) {
  const double x = kLeft + kPlotW + 20;
  double y = kTop + 10;
  for (const auto& s : series) {
    svg.rect(x, y - 9, 14, 10, s.color);
    svg.text(x + 20, y, s.label, "start", 12);
    y += 20;
  }
}

double x_center(std::size_t i, std::size_t count) {
  return kLeft + kPlotW / static_cast<double>(count) * (static_cast<double>(i) + 0.5);
}

void draw_lines(Svg& svg, const std::vector<Series>& series, const YAxis& axis, std::size_t count) {
  for (const auto& s : series) {
    std::vector<std::pair<double, double>> run;
    auto flush = [&] {
      svg.polyline(run, s.color);
      run.clear();
    };
    for (std::size_t i = 0; i < count; ++i) {
      const auto& v = s.values[i];
      if (!v || (axis.log && *v <= 0)) {
        flush();
        continue;
      }
      run.emplace_back(x_center(i, count), axis.to_px(*v));
    }
    flush();
    for (std::size_t i = 0; i < count; ++i) {
      const auto& v = s.values[i];
      if (v && !(axis.log && *v <= 0)) svg.circle(x_center(i, count), axis.to_px(*v), 3.5, s.color);
    }
  }
}

SpeedupTable rounded(const SpeedupTable& table) { return parse_csv(emit_csv(table)); }

std::vector<std::size_t> sizes_of(const SpeedupTable& t) {
  std::vector<std::size_t> out;
  for (const auto& r : t.rows) out.push_back(r.n);
  return out;
}

template <typename Getter>
std::vector<std::optional<double>> column(const SpeedupTable& t, Getter get) {
  std::vector<std::optional<double>> out;
  for (const auto& r : t.rows) out.push_back(get(r));
  return out;
}

std::string execution_time_figure(const SpeedupTable& t) {
  const std::vector<Series> series = {
      {"Sequential CPU", kSeqColor, column(t, [](const SpeedupRow& r) { return r.seq_ms; })},
      {"Parallel CPU", kCpuColor, column(t, [](const SpeedupRow& r) { return r.par_cpu_ms; })},
      {"Parallel GPU", kGpuColor, column(t, [](const SpeedupRow& r) { return r.gpu_ms; })},
  };
  const auto sizes = sizes_of(t);
  const YAxis axis = log_axis(series);
  Svg svg;
  draw_frame(svg, "Execution Time vs Matrix Size", "Execution Time (ms, log scale)", axis, sizes);
  draw_lines(svg, series, axis, sizes.size());
  draw_legend(svg, series);
  return svg.finish();
}

std::string speedup_vs_seq_figure(const SpeedupTable& t) {
  const std::vector<Series> series = {
      {"Parallel CPU vs Seq.", kCpuColor, column(t, [](const SpeedupRow& r) { return r.speedup_cpu_vs_seq; })},
      {"Parallel GPU vs Seq.", kGpuColor, column(t, [](const SpeedupRow& r) { return r.speedup_gpu_vs_seq; })},
  };
  const auto sizes = sizes_of(t);
  YAxis axis = log_axis(series);
  // Keep the 1x reference inside the plot.
  axis.lo = std::min(axis.lo, 0.5);
  axis.hi = std::max(axis.hi, 2.0);
  Svg svg;
  draw_frame(svg, "Speedup Relative to Sequential CPU", "Speedup (x, log scale)", axis, sizes);

  const double slot = kPlotW / static_cast<double>(sizes.size());
  const double bar = slot * 0.8 / static_cast<double>(series.size());
  const double base = kTop + kPlotH;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double left = kLeft + slot * static_cast<double>(i) + slot * 0.1;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const auto& v = series[s].values[i];
      if (!v || *v <= 0) continue;
      const double top = axis.to_px(*v);
      svg.rect(left + bar * static_cast<double>(s), top, bar * 0.95, base - top, series[s].color);
      svg.text(left + bar * (static_cast<double>(s) + 0.5), top - 4, format_fixed(*v, 2), "middle", 9);
    }
  }
  const double one = axis.to_px(1.0);
  svg.line(kLeft, one, kLeft + kPlotW, one, "#444444", 1.0, "6,4");
  svg.text(kLeft + kPlotW - 4, one - 4, "1x", "end", 10);
  draw_legend(svg, series);
  return svg.finish();
}

std::string gpu_vs_cpu_figure(const SpeedupTable& t) {
  const std::vector<Series> series = {
      {"GPU vs Parallel CPU", kGpuColor, column(t, [](const SpeedupRow& r) { return r.speedup_gpu_vs_cpu; })},
  };
  const auto sizes = sizes_of(t);
  const YAxis axis = linear_axis(series);
  Svg svg;
  draw_frame(svg, "GPU Speedup over Parallel CPU", "Speedup (x)", axis, sizes);
  draw_lines(svg, series, axis, sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const auto& v = series[0].values[i];
    if (v) svg.text(x_center(i, sizes.size()), axis.to_px(*v) - 8, format_fixed(*v, 2) + "x", "middle", 10);
  }
  draw_legend(svg, series);
  return svg.finish();
}

}  // namespace

FigureSet render_figures(const SpeedupTable& table) {
  if (table.rows.size() < 2) {
    throw InsufficientData("figures need at least 2 rows, table has " + std::to_string(table.rows.size()));
  }
  const SpeedupTable t = rounded(table);
  return {execution_time_figure(t), speedup_vs_seq_figure(t), gpu_vs_cpu_figure(t)};
}

std::vector<std::filesystem::path> emit_figures(const SpeedupTable& table, const std::filesystem::path& out_dir) {
  const FigureSet figures = render_figures(table);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create figure directory " + out_dir.string() + (ec ? ": " + ec.message() : ""));
  }
  std::vector<std::filesystem::path> paths = {out_dir / kFigureExecutionTime, out_dir / kFigureSpeedupVsSeq,
                                              out_dir / kFigureGpuVsCpu};
  write_text_file(paths[0], figures.execution_time);
  write_text_file(paths[1], figures.speedup_vs_seq);
  write_text_file(paths[2], figures.gpu_vs_cpu);
  return paths;
}

}  // namespace gemmlab::report
