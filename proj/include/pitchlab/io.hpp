#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pitchlab/geometry.hpp"
#include "pitchlab/imputation.hpp"
#include "pitchlab/metrics.hpp"
#include "pitchlab/projection.hpp"
#include "pitchlab/rollout.hpp"

namespace pitchlab::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Segment files
//
//   # pitchlab segment v1
//   segment_id,<id>
//   match_id,<id>
//   fps,<number>
//   phase,<Attack|Defense|Transition>
//   outcome,<Successful|Failed|none>
//   frame_idx,agent_id,x,y,observed
//   <frame>,<agent>,<x>,<y>,<0|1>      one row per (frame, agent), sorted
//
// Coordinates carry exactly six fractional digits.

std::string format_segment(const Segment& s);
Segment parse_segment(const std::string& text, const std::string& source = "<memory>");
void write_segment(const fs::path& path, const Segment& s);
Segment read_segment(const fs::path& path);

/// Every *.seg file of a directory, sorted by file name.
std::vector<fs::path> list_segment_files(const fs::path& dir);
std::vector<Segment> read_segment_dir(const fs::path& dir);

/// Rounds a coordinate to the value its six-digit text form parses back to.
double quantize6(double v);

// ---------------------------------------------------------------------------
// Dataset split by match identity

enum class Split { Train, Val, Test };
std::string to_string(Split s);

struct SplitManifest {
  std::uint64_t seed = 0;
  std::map<std::string, Split> assignment;

  std::size_t count(Split s) const;
  std::vector<std::string> matches(Split s) const;
};

/// Seeded shuffle of the distinct match ids, then a contiguous cut:
/// train = floor(0.7 n), test = floor(0.15 n), validation = the rest.
SplitManifest split_dataset(std::vector<std::string> match_ids, std::uint64_t seed);
void write_manifest(const fs::path& path, const SplitManifest& m);
SplitManifest read_manifest(const fs::path& path);

// ---------------------------------------------------------------------------
// Synthetic possessions

enum class Scenario { WingAttack, CentralBuildup, CounterAttack, SetPiece, RandomWalk };
std::string to_string(Scenario s);
std::optional<Scenario> parse_scenario(const std::string& s);
std::vector<Scenario> all_scenarios();

struct ScenarioSpec {
  Scenario scenario = Scenario::WingAttack;
  double duration_s = 10.0;
  double noise_sigma = 0.002;
  std::uint64_t seed = 0;
  double fps = 25.0;
  std::string segment_id;  // generated from scenario and seed when empty
  std::string match_id;    // generated from seed when empty
};

/// Scripted waypoint play: the ball follows a smooth path through
/// scenario-specific waypoints, both teams shift with it and a nearby
/// attacker shadows the ball. Team A (slots 0..10) attacks toward x = +1.
Segment generate_synthetic(const ScenarioSpec& spec);

// ---------------------------------------------------------------------------
// Checkpoints: named tensors with shape headers, values as decimal text.

void write_imputer(const fs::path& path, const imputation::ImputerParams& p);
imputation::ImputerParams read_imputer(const fs::path& path);
void write_bc(const fs::path& path, const rollout::BCParams& p);
rollout::BCParams read_bc(const fs::path& path);

// ---------------------------------------------------------------------------
// Calibration inputs

/// Rows "frame,u,v,X,Y": pixel (u, v) observed at metric pitch point (X, Y).
std::map<std::size_t, std::vector<projection::Correspondence>> read_correspondences(const fs::path& path);
/// Rows "frame,h00,...,h22", matrix row-major.
void write_homographies(const fs::path& path, const projection::CalibrationTrack& track);
projection::CalibrationTrack read_homographies(const fs::path& path);
/// Rows "frame,agent_id,x_min,y_min,x_max,y_max".
std::vector<projection::Detection> read_detections(const fs::path& path);

// ---------------------------------------------------------------------------
// Reports

/// Writes rows.csv, summary.csv, summary.md and, when the rows carry
/// occupancy grids, heatmap_<grid>_{gt,pred}.ppm.
std::vector<fs::path> emit_report(const metrics::EvalReport& report, const fs::path& out_dir);

std::string format_rows_csv(const std::vector<metrics::EvalRow>& rows);
std::vector<metrics::EvalRow> read_rows_csv(const fs::path& path);
std::string format_summary_csv(const std::vector<metrics::SummaryCell>& cells);
std::string format_summary_markdown(const std::vector<metrics::SummaryCell>& cells);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kHeatmapBackground{24, 24, 24};
Rgb heatmap_color(double fraction);

struct Image {
  std::size_t width = 0, height = 0;
  std::vector<Rgb> pixels;  // row-major, top row first
};

/// Each cell becomes a square block; row 0 of the grid (y = -0.42) is drawn at
/// the bottom.
Image render_heatmap(const metrics::OccupancyGrid& grid, std::size_t cell_px);
void write_ppm(const fs::path& path, const Image& img);
Image read_ppm(const fs::path& path);

/// PITCHLAB_OUT_DIR when set, otherwise "pitchlab-out".
fs::path default_output_dir();

}  // namespace pitchlab::io
