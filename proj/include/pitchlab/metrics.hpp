#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pitchlab/geometry.hpp"

namespace pitchlab::metrics {

/// Uniform grid with `cells_l` columns along the pitch length and `cells_w`
/// rows along its width.
struct FixedGrid {
  std::size_t cells_l = 1;
  std::size_t cells_w = 1;
  friend bool operator==(const FixedGrid&, const FixedGrid&) = default;
};

/// Cell size driven by motion intensity, clamped to [delta_min, delta_max]
/// (normalized units).
struct AdaptiveGrid {
  double alpha = 1.0;
  double delta_min = 0.05;
  double delta_max = 0.5;
  friend bool operator==(const AdaptiveGrid&, const AdaptiveGrid&) = default;
};

using GridConfig = std::variant<FixedGrid, AdaptiveGrid>;

/// "15x10" or "adaptive:<alpha>:<delta_min>:<delta_max>".
std::string grid_label(const GridConfig& g);
std::optional<GridConfig> parse_grid(const std::string& text);
void validate_grid(const GridConfig& g);

/// The five resolutions of the reference benchmark table.
std::vector<GridConfig> reference_grids();
/// 3 s, 5 s and 10 s.
std::vector<double> reference_horizons();

double adaptive_cell_size(const MotionStats& stats, const AdaptiveGrid& g);
FixedGrid grid_from_cell_size(double delta);
/// Metric aspect ratio of one cell: (length / cells_l) / (width / cells_w).
double cell_aspect(const FixedGrid& g, const PitchSpec& spec = {});

/// Per-cell visit counts of one agent over a horizon. Row index runs along the
/// pitch width (y), column index along its length (x).
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), counts_(rows * cols, 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t frame_count() const noexcept { return frame_count_; }
  std::uint32_t count(std::size_t r, std::size_t c) const { return counts_[r * cols_ + c]; }
  bool occupied(std::size_t r, std::size_t c) const { return count(r, c) > 0; }
  std::size_t occupied_cells() const noexcept;
  std::span<const std::uint32_t> counts() const noexcept { return counts_; }

  void add(std::size_t r, std::size_t c) {
    ++counts_[r * cols_ + c];
    ++frame_count_;
  }
  /// Cellwise sum of another grid of the same shape.
  void accumulate(const OccupancyGrid& other);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t frame_count_ = 0;
  std::vector<std::uint32_t> counts_;
};

/// (row, col) of a normalized point; the far boundary bins into the last cell
/// and out-of-range points are clamped to the edge cells.
std::pair<std::size_t, std::size_t> cell_of(const NormalizedPoint& p, const FixedGrid& g);

OccupancyGrid build_occupancy(std::span<const NormalizedPoint> traj, const FixedGrid& g,
                              std::size_t horizon_frames);

/// Jaccard index of the occupied cell sets; two empty grids score 1.
double spatial_occupancy_similarity(const OccupancyGrid& gt, const OccupancyGrid& pred);

/// Row-major flattening of the visit counts.
std::vector<double> motion_vector(const OccupancyGrid& grid);

/// (cos + 1) / 2. Both vectors zero gives 1, exactly one zero gives 0.
double movement_similarity(std::span<const double> v_gt, std::span<const double> v_pred);

enum class ScoreMean { Arithmetic, Harmonic };

double composite_score(double s_t, double s_v, ScoreMean mean = ScoreMean::Arithmetic);

struct SimilarityResult {
  double s_t = 0.0;
  double s_v = 0.0;
  double score = 0.0;
};

SimilarityResult compare(const OccupancyGrid& gt, const OccupancyGrid& pred,
                         ScoreMean mean = ScoreMean::Arithmetic);

struct EvalRow {
  std::string segment_id;
  std::string grid;        // label of the requested configuration
  FixedGrid resolved;      // cells actually used
  double horizon_s = 0.0;
  std::size_t horizon_frames = 0;
  SimilarityResult result;
  std::optional<OccupancyGrid> gt_grid;
  std::optional<OccupancyGrid> pred_grid;
};

struct EvalOptions {
  std::size_t target = kBallIndex;
  ScoreMean mean = ScoreMean::Arithmetic;
  bool keep_grids = false;
};

std::size_t horizon_to_frames(double seconds, double fps);

/// Scores `pred` against `gt` for every (grid, horizon) pair; both sequences
/// start at the same frame.
std::vector<EvalRow> evaluate_segment(const Segment& gt, const Segment& pred,
                                      std::span<const GridConfig> grids,
                                      std::span<const double> horizons,
                                      const EvalOptions& options = {});

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

struct SummaryCell {
  std::string grid;
  double horizon_s = 0.0;
  std::size_t count = 0;
  Moments s_t;
  Moments s_v;
  Moments score;
};

/// Per (grid, horizon) mean and population standard deviation, in first-seen
/// order.
std::vector<SummaryCell> aggregate(std::span<const EvalRow> rows);

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<SummaryCell> summary;
};

struct SegmentPair {
  const Segment* gt = nullptr;
  const Segment* pred = nullptr;
};

enum class Execution { Serial, Parallel };

/// Evaluates every pair; rows come back in pair order regardless of the
/// execution mode. The serial path is the reference for the parallel one.
std::vector<EvalRow> evaluate_dataset(std::span<const SegmentPair> pairs,
                                      std::span<const GridConfig> grids,
                                      std::span<const double> horizons,
                                      const EvalOptions& options = {},
                                      Execution exec = Execution::Parallel);

}  // namespace pitchlab::metrics
