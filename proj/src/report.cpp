#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <string>

#include "pitchlab/error.hpp"
#include "pitchlab/io.hpp"
#include "text_util.hpp"

namespace pitchlab::io {

namespace {

constexpr const char* kRowsHeader = "segment_id,grid,cells_l,cells_w,horizon_s,horizon_frames,s_t,s_v,score";

std::string pct(double v) { return detail::fmt("%.2f", 100.0 * v); }

std::string proportion_of(const std::string& label) {
  const auto g = metrics::parse_grid(label);
  if (!g || !std::holds_alternative<metrics::FixedGrid>(*g)) return "-";
  return detail::fmt("%.4f", metrics::cell_aspect(std::get<metrics::FixedGrid>(*g)));
}

std::string file_safe(std::string s) {
  for (char& c : s) {
    if (c == ':' || c == '/' || c == ' ') c = '_';
  }
  return s;
}

}  // namespace

std::string format_rows_csv(const std::vector<metrics::EvalRow>& rows) {
  std::vector<const metrics::EvalRow*> sorted;
  for (const auto& r : rows) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto* a, const auto* b) { return a->segment_id < b->segment_id; });
  std::string out = std::string(kRowsHeader) + "\n";
  for (const auto* r : sorted) {
    out += r->segment_id + "," + r->grid + "," + std::to_string(r->resolved.cells_l) + "," +
           std::to_string(r->resolved.cells_w) + "," + detail::fmt("%.6f", r->horizon_s) + "," +
           std::to_string(r->horizon_frames) + "," + detail::fmt("%.6f", r->result.s_t) + "," +
           detail::fmt("%.6f", r->result.s_v) + "," + detail::fmt("%.6f", r->result.score) + "\n";
  }
  return out;
}

std::vector<metrics::EvalRow> read_rows_csv(const fs::path& path) {
  const std::string text = detail::read_file(path);
  const std::string src = path.string();
  detail::LineReader lines(text);
  std::string_view line;
  if (!lines.next(line) || line != kRowsHeader) {
    throw ParseError(src, lines.line_no(), std::string("expected header '") + kRowsHeader + "'");
  }
  std::vector<metrics::EvalRow> rows;
  while (lines.next(line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    const auto fail = [&](const std::string& why) { return ParseError(src, lines.line_no(), why); };
    if (f.size() != 9) throw fail("expected 9 fields, got " + std::to_string(f.size()));
    metrics::EvalRow r;
    r.segment_id = std::string(f[0]);
    r.grid = std::string(f[1]);
    const auto cl = detail::parse_int<std::size_t>(f[2]);
    const auto cw = detail::parse_int<std::size_t>(f[3]);
    const auto hs = detail::parse_double(f[4]);
    const auto hf = detail::parse_int<std::size_t>(f[5]);
    const auto st = detail::parse_double(f[6]);
    const auto sv = detail::parse_double(f[7]);
    const auto sc = detail::parse_double(f[8]);
    if (!cl || !cw || *cl == 0 || *cw == 0) throw fail("bad grid shape");
    if (!hs || !hf) throw fail("bad horizon");
    if (!st || !sv || !sc) throw fail("bad similarity value");
    r.resolved = {*cl, *cw};
    r.horizon_s = *hs;
    r.horizon_frames = *hf;
    r.result = {*st, *sv, *sc};
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string format_summary_csv(const std::vector<metrics::SummaryCell>& cells) {
  std::string out = "grid,horizon_s,count,s_t_mean,s_t_std,s_v_mean,s_v_std,score_mean,score_std\n";
  for (const auto& c : cells) {
    out += c.grid + "," + detail::fmt("%.6f", c.horizon_s) + "," + std::to_string(c.count) + "," +
           detail::fmt("%.6f", c.s_t.mean) + "," + detail::fmt("%.6f", c.s_t.stddev) + "," +
           detail::fmt("%.6f", c.s_v.mean) + "," + detail::fmt("%.6f", c.s_v.stddev) + "," +
           detail::fmt("%.6f", c.score.mean) + "," + detail::fmt("%.6f", c.score.stddev) + "\n";
  }
  return out;
}

std::string format_summary_markdown(const std::vector<metrics::SummaryCell>& cells) {
  std::vector<std::string> grids;
  std::vector<double> horizons;
  for (const auto& c : cells) {
    if (std::find(grids.begin(), grids.end(), c.grid) == grids.end()) grids.push_back(c.grid);
    if (std::find(horizons.begin(), horizons.end(), c.horizon_s) == horizons.end()) horizons.push_back(c.horizon_s);
  }
  std::sort(horizons.begin(), horizons.end());

  std::string out = "# Evaluation summary\n\nValues are means over segments, scaled by 100.\n";
  const auto find = [&](const std::string& g, double h) -> const metrics::SummaryCell* {
    for (const auto& c : cells) {
      if (c.grid == g && c.horizon_s == h) return &c;
    }
    return nullptr;
  };
  for (const auto& g : grids) {
    out += "\n## Grid " + g + "\n\nProportion (L/W): " + proportion_of(g) + "\n\n| Metric |";
    for (double h : horizons) out += " " + detail::fmt("%g", h) + "s |";
    out += "\n|---|";
    for (std::size_t i = 0; i < horizons.size(); ++i) out += "---:|";
    out += "\n";
    const std::pair<const char*, metrics::Moments metrics::SummaryCell::*> metrics_rows[] = {
        {"Score", &metrics::SummaryCell::score},
        {"S_t", &metrics::SummaryCell::s_t},
        {"S_v", &metrics::SummaryCell::s_v}};
    for (const auto& [name, member] : metrics_rows) {
      out += std::string("| ") + name + " |";
      for (double h : horizons) {
        const auto* c = find(g, h);
        out += " " + (c ? pct((c->*member).mean) : std::string("-")) + " |";
      }
      out += "\n";
    }
  }
  return out;
}

Rgb heatmap_color(double fraction) {
  // Piecewise-linear ramp through five anchor colors, dark blue to yellow.
  static constexpr double kStops[5][3] = {
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  const double f = std::clamp(fraction, 0.0, 1.0) * 4.0;
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(f), 3);
  const double t = f - static_cast<double>(i);
  Rgb c;
  std::uint8_t* ch[] = {&c.r, &c.g, &c.b};
  for (int k = 0; k < 3; ++k) {
    *ch[k] = static_cast<std::uint8_t>(std::lround(kStops[i][k] + t * (kStops[i + 1][k] - kStops[i][k])));
  }
  return c;
}

Image render_heatmap(const metrics::OccupancyGrid& grid, std::size_t cell_px) {
  if (cell_px == 0) throw Error(ErrorCode::InvalidArgument, "cell_px must be positive");
  Image img;
  img.width = grid.cols() * cell_px;
  img.height = grid.rows() * cell_px;
  img.pixels.assign(img.width * img.height, kHeatmapBackground);
  std::uint32_t peak = 0;
  for (auto v : grid.counts()) peak = std::max(peak, v);
  if (peak == 0) return img;
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    for (std::size_t c = 0; c < grid.cols(); ++c) {
      const auto n = grid.count(r, c);
      if (n == 0) continue;
      const Rgb color = heatmap_color(static_cast<double>(n) / peak);
      const std::size_t top = (grid.rows() - 1 - r) * cell_px;
      for (std::size_t y = top; y < top + cell_px; ++y) {
        std::fill_n(img.pixels.begin() + static_cast<std::ptrdiff_t>(y * img.width + c * cell_px), cell_px, color);
      }
    }
  }
  return img;
}

void write_ppm(const fs::path& path, const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + 3 * img.pixels.size());
  for (const auto& p : img.pixels) {
    out += static_cast<char>(p.r);
    out += static_cast<char>(p.g);
    out += static_cast<char>(p.b);
  }
  detail::write_file(path, out);
}

Image read_ppm(const fs::path& path) {
  const std::string data = detail::read_file(path);
  std::size_t pos = 0;
  const auto token = [&]() {
    while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return std::string_view(data).substr(start, pos - start);
  };
  const std::string src = path.string();
  if (token() != "P6") throw ParseError(src, 1, "not a binary PPM");
  const auto w = detail::parse_int<std::size_t>(token());
  const auto h = detail::parse_int<std::size_t>(token());
  const auto maxval = token();
  if (!w || !h || maxval != "255") throw ParseError(src, 1, "bad PPM header");
  ++pos;  // single whitespace before the raster
  Image img;
  img.width = *w;
  img.height = *h;
  if (data.size() - pos != 3 * img.width * img.height) throw ParseError(src, 1, "PPM raster size mismatch");
  img.pixels.resize(img.width * img.height);
  for (auto& p : img.pixels) {
    p.r = static_cast<std::uint8_t>(data[pos++]);
    p.g = static_cast<std::uint8_t>(data[pos++]);
    p.b = static_cast<std::uint8_t>(data[pos++]);
  }
  return img;
}

std::vector<fs::path> emit_report(const metrics::EvalReport& report, const fs::path& out_dir) {
  if (report.rows.empty()) throw Error(ErrorCode::EmptyReport, "nothing to report");
  const auto summary = report.summary.empty() ? metrics::aggregate(report.rows) : report.summary;
  std::vector<fs::path> written;
  const auto put = [&](const std::string& name, const std::string& text) {
    const fs::path p = out_dir / name;
    detail::write_file(p, text);
    written.push_back(p);
  };
  put("rows.csv", format_rows_csv(report.rows));
  put("summary.csv", format_summary_csv(summary));
  put("summary.md", format_summary_markdown(summary));

  // Heatmaps: occupancy summed over segments at each grid's longest horizon.
  struct Acc {
    double horizon = -1.0;
    bool consistent = true;
    std::optional<metrics::OccupancyGrid> gt, pred;
  };
  std::map<std::string, Acc> acc;
  std::vector<std::string> order;
  for (const auto& r : report.rows) {
    if (!acc.count(r.grid)) order.push_back(r.grid);
    auto& a = acc[r.grid];
    a.horizon = std::max(a.horizon, r.horizon_s);
  }
  for (const auto& r : report.rows) {
    auto& a = acc[r.grid];
    if (r.horizon_s != a.horizon || !r.gt_grid || !r.pred_grid) continue;
    const auto add = [&](std::optional<metrics::OccupancyGrid>& into, const metrics::OccupancyGrid& g) {
      if (!into) {
        into = g;
      } else if (into->rows() != g.rows() || into->cols() != g.cols()) {
        a.consistent = false;
      } else {
        into->accumulate(g);
      }
    };
    add(a.gt, *r.gt_grid);
    add(a.pred, *r.pred_grid);
  }
  for (const auto& g : order) {
    const auto& a = acc[g];
    if (!a.consistent || !a.gt || !a.pred) continue;
    const std::size_t cell_px = std::max<std::size_t>(4, 240 / std::max(a.gt->cols(), a.gt->rows()));
    const fs::path gp = out_dir / ("heatmap_" + file_safe(g) + "_gt.ppm");
    const fs::path pp = out_dir / ("heatmap_" + file_safe(g) + "_pred.ppm");
    write_ppm(gp, render_heatmap(*a.gt, cell_px));
    write_ppm(pp, render_heatmap(*a.pred, cell_px));
    written.push_back(gp);
    written.push_back(pp);
  }
  return written;
}

fs::path default_output_dir() {
  if (const char* env = std::getenv("PITCHLAB_OUT_DIR"); env && *env) return env;
  return "pitchlab-out";
}

}  // namespace pitchlab::io
