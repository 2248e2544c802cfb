#include <cmath>
#include <string>

#include "pitchlab/error.hpp"
#include "pitchlab/io.hpp"
#include "text_util.hpp"

namespace pitchlab::io {

namespace {

// Reads a header line followed by fixed-width numeric rows.
template <typename RowFn>
void read_table(const fs::path& path, const std::string& header, std::size_t width, RowFn&& on_row) {
  const std::string text = detail::read_file(path);
  detail::LineReader lines(text);
  std::string_view line;
  if (!lines.next(line) || line != header) {
    throw ParseError(path.string(), lines.line_no(), "expected header '" + header + "'");
  }
  while (lines.next(line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto f = detail::split_csv(line);
    if (f.size() != width) {
      throw ParseError(path.string(), lines.line_no(),
                       "expected " + std::to_string(width) + " fields, got " + std::to_string(f.size()));
    }
    const auto frame = detail::parse_int<std::size_t>(f[0]);
    if (!frame) throw ParseError(path.string(), lines.line_no(), "bad frame index '" + std::string(f[0]) + "'");
    std::vector<double> vals;
    for (std::size_t k = 1; k < width; ++k) {
      const auto v = detail::parse_double(f[k]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(path.string(), lines.line_no(), "bad number '" + std::string(f[k]) + "'");
      }
      vals.push_back(*v);
    }
    on_row(*frame, vals, lines.line_no());
  }
}

}  // namespace

std::map<std::size_t, std::vector<projection::Correspondence>> read_correspondences(const fs::path& path) {
  std::map<std::size_t, std::vector<projection::Correspondence>> out;
  read_table(path, "frame,u,v,X,Y", 5, [&](std::size_t frame, const std::vector<double>& v, std::size_t) {
    out[frame].push_back({{v[0], v[1]}, {v[2], v[3]}});
  });
  return out;
}

void write_homographies(const fs::path& path, const projection::CalibrationTrack& track) {
  std::string out = "frame,h00,h01,h02,h10,h11,h12,h20,h21,h22\n";
  for (const auto& [frame, h] : track.frames()) {
    out += std::to_string(frame);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out += "," + detail::fmt("%.17g", h(r, c));
    }
    out += "\n";
  }
  detail::write_file(path, out);
}

projection::CalibrationTrack read_homographies(const fs::path& path) {
  projection::CalibrationTrack track;
  read_table(path, "frame,h00,h01,h02,h10,h11,h12,h20,h21,h22", 10,
             [&](std::size_t frame, const std::vector<double>& v, std::size_t line) {
               Eigen::Matrix3d m;
               m << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
               try {
                 track.set(frame, projection::Homography::from_matrix(m));
               } catch (const Error& e) {
                 throw ParseError(path.string(), line, e.what());
               }
             });
  return track;
}

std::vector<projection::Detection> read_detections(const fs::path& path) {
  std::vector<projection::Detection> out;
  const std::string text = detail::read_file(path);
  detail::LineReader lines(text);
  std::string_view line;
  const std::string header = "frame,agent_id,x_min,y_min,x_max,y_max";
  if (!lines.next(line) || line != header) {
    throw ParseError(path.string(), lines.line_no(), "expected header '" + header + "'");
  }
  while (lines.next(line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto f = detail::split_csv(line);
    const auto fail = [&](const std::string& why) { return ParseError(path.string(), lines.line_no(), why); };
    if (f.size() != 6) throw fail("expected 6 fields");
    projection::Detection d;
    const auto frame = detail::parse_int<std::size_t>(f[0]);
    if (!frame) throw fail("bad frame index");
    d.frame_idx = *frame;
    if (!f[1].empty() && f[1] != "-") {
      const auto a = detail::parse_int<std::size_t>(f[1]);
      if (!a || *a >= kNumAgents) throw fail("agent_id must be in [0,22] or '-'");
      d.agent = *a;
    }
    double* dst[] = {&d.x_min, &d.y_min, &d.x_max, &d.y_max};
    for (std::size_t k = 0; k < 4; ++k) {
      const auto v = detail::parse_double(f[k + 2]);
      if (!v || !std::isfinite(*v)) throw fail("bad box coordinate");
      *dst[k] = *v;
    }
    if (!d.valid()) throw fail("box needs x_min < x_max and y_min < y_max");
    out.push_back(d);
  }
  return out;
}

}  // namespace pitchlab::io
