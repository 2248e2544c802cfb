#include <algorithm>
#include <cmath>
#include <string>

#include "pitchlab/error.hpp"
#include "pitchlab/io.hpp"
#include "text_util.hpp"

namespace pitchlab::io {

using detail::LineReader;
using detail::parse_double;
using detail::parse_int;
using detail::split_csv;

namespace {

constexpr const char* kSegmentMagic = "# pitchlab segment v1";
constexpr const char* kRowHeader = "frame_idx,agent_id,x,y,observed";

void check_id(const std::string& id, const char* what) {
  if (id.empty() || id.find_first_of(",\n\r") != std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be non-empty without commas or newlines");
  }
}

}  // namespace

double quantize6(double v) { return std::round(v * 1e6) / 1e6; }

std::string format_segment(const Segment& s) {
  check_id(s.segment_id, "segment_id");
  check_id(s.match_id, "match_id");
  if (!s.phase.valid()) throw Error(ErrorCode::InvalidArgument, "phase label is inconsistent");
  std::string out;
  out.reserve(64 + s.frames.size() * kNumAgents * 32);
  out += kSegmentMagic;
  out += "\nsegment_id," + s.segment_id;
  out += "\nmatch_id," + s.match_id;
  out += "\nfps," + detail::fmt("%.17g", s.fps);
  out += "\nphase," + to_string(s.phase.phase);
  out += "\noutcome," + (s.phase.outcome ? to_string(*s.phase.outcome) : std::string("none"));
  out += "\n";
  out += kRowHeader;
  out += "\n";
  char buf[128];
  for (std::size_t t = 0; t < s.frames.size(); ++t) {
    if (s.frames[t].size() != kNumAgents) {
      throw Error(ErrorCode::InvalidArgument, "frame " + std::to_string(t) + " does not hold 23 agents");
    }
    for (std::size_t a = 0; a < kNumAgents; ++a) {
      const auto& p = s.frames[t][a];
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.6f,%.6f,%d\n", t, a, p.x, p.y, s.is_observed(t, a) ? 1 : 0);
      out += buf;
    }
  }
  return out;
}

Segment parse_segment(const std::string& text, const std::string& source) {
  LineReader lines(text);
  std::string_view line;
  const auto fail = [&](const std::string& why) -> ParseError { return ParseError(source, lines.line_no(), why); };

  if (!lines.next(line) || line != kSegmentMagic) throw fail("missing '# pitchlab segment v1' header");

  Segment s;
  bool have_outcome = false;
  std::optional<std::string> outcome_text;
  const char* keys[] = {"segment_id", "match_id", "fps", "phase", "outcome"};
  for (const char* key : keys) {
    if (!lines.next(line)) throw fail(std::string("missing ") + key + " line");
    const auto f = split_csv(line);
    if (f.size() != 2 || f[0] != key) throw fail(std::string("expected '") + key + ",<value>'");
    const std::string v(f[1]);
    if (std::string(key) == "segment_id") {
      if (v.empty()) throw fail("empty segment_id");
      s.segment_id = v;
    } else if (std::string(key) == "match_id") {
      if (v.empty()) throw fail("empty match_id");
      s.match_id = v;
    } else if (std::string(key) == "fps") {
      const auto fps = parse_double(v);
      if (!fps || !(*fps > 0.0) || !std::isfinite(*fps)) throw fail("fps must be a positive number");
      s.fps = *fps;
    } else if (std::string(key) == "phase") {
      const auto p = parse_phase(v);
      if (!p) throw fail("unknown phase '" + v + "'");
      s.phase.phase = *p;
    } else {
      have_outcome = true;
      outcome_text = v;
    }
  }
  if (have_outcome && *outcome_text != "none") {
    const auto o = parse_outcome(*outcome_text);
    if (!o) throw fail("unknown outcome '" + *outcome_text + "'");
    s.phase.outcome = *o;
  }
  if (!s.phase.valid()) throw fail("outcome must be given exactly for Attack and Defense");

  if (!lines.next(line) || line != kRowHeader) throw fail("expected row header '" + std::string(kRowHeader) + "'");

  bool any_unobserved = false;
  std::optional<std::pair<std::size_t, std::size_t>> prev;
  while (lines.next(line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 5) throw fail("expected 5 fields, got " + std::to_string(f.size()));
    const auto frame = parse_int<std::size_t>(f[0]);
    const auto agent = parse_int<std::size_t>(f[1]);
    const auto x = parse_double(f[2]);
    const auto y = parse_double(f[3]);
    const auto obs = parse_int<int>(f[4]);
    if (!frame) throw fail("bad frame_idx '" + std::string(f[0]) + "'");
    if (!agent) throw fail("bad agent_id '" + std::string(f[1]) + "'");
    if (*agent >= kNumAgents) throw fail("agent_id " + std::to_string(*agent) + " out of range [0,22]");
    if (!x || !std::isfinite(*x)) throw fail("bad x '" + std::string(f[2]) + "'");
    if (!y || !std::isfinite(*y)) throw fail("bad y '" + std::string(f[3]) + "'");
    if (!obs || (*obs != 0 && *obs != 1)) throw fail("observed flag must be 0 or 1");
    if (!in_normalized_bounds({*x, *y})) {
      throw fail("point (" + std::string(f[2]) + ", " + std::string(f[3]) + ") outside normalized bounds");
    }

    const auto key = std::make_pair(*frame, *agent);
    if (prev && key == *prev) throw fail("duplicate record for frame " + std::to_string(*frame) + ", agent " + std::to_string(*agent));
    if (prev && key < *prev) throw fail("rows not sorted by (frame_idx, agent_id)");
    const std::size_t expect_frame = prev ? (prev->second + 1 == kNumAgents ? prev->first + 1 : prev->first) : 0;
    const std::size_t expect_agent = prev ? (prev->second + 1) % kNumAgents : 0;
    if (*frame != expect_frame || *agent != expect_agent) {
      throw fail("missing record for frame " + std::to_string(expect_frame) + ", agent " + std::to_string(expect_agent));
    }
    prev = key;
    if (*agent == 0) {
      s.frames.emplace_back(kNumAgents);
      s.observed.emplace_back(kNumAgents, 1);
    }
    s.frames.back()[*agent] = {*x, *y};
    s.observed.back()[*agent] = static_cast<std::uint8_t>(*obs);
    any_unobserved = any_unobserved || *obs == 0;
  }
  if (s.frames.empty()) throw fail("segment has no rows");
  if (prev->second != kNumAgents - 1) {
    throw fail("frame " + std::to_string(prev->first) + " is missing agents after " + std::to_string(prev->second));
  }
  if (!any_unobserved) s.observed.clear();
  return s;
}

void write_segment(const fs::path& path, const Segment& s) { detail::write_file(path, format_segment(s)); }

Segment read_segment(const fs::path& path) { return parse_segment(detail::read_file(path), path.string()); }

std::vector<fs::path> list_segment_files(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".seg") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Segment> read_segment_dir(const fs::path& dir) {
  std::vector<Segment> out;
  for (const auto& p : list_segment_files(dir)) out.push_back(read_segment(p));
  return out;
}

}  // namespace pitchlab::io
