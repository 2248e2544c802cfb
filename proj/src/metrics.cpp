#include "pitchlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>


#include "pitchlab/error.hpp"

namespace pitchlab::metrics {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::string grid_label(const GridConfig& g) {
  if (const auto* f = std::get_if<FixedGrid>(&g)) {
    return std::to_string(f->cells_l) + "x" + std::to_string(f->cells_w);
  }
  const auto& a = std::get<AdaptiveGrid>(g);
  return "adaptive:" + fmt_double(a.alpha) + ":" + fmt_double(a.delta_min) + ":" + fmt_double(a.delta_max);
}

std::optional<GridConfig> parse_grid(const std::string& text) {
  if (text.rfind("adaptive:", 0) == 0) {
    AdaptiveGrid a;
    char tail = 0;
    if (std::sscanf(text.c_str() + 9, "%lf:%lf:%lf%c", &a.alpha, &a.delta_min, &a.delta_max, &tail) != 3) {
      return std::nullopt;
    }
    if (!(a.alpha > 0.0) || !(a.delta_min > 0.0) || !(a.delta_max >= a.delta_min)) return std::nullopt;
    return a;
  }
  const auto x = text.find_first_of("xX");
  if (x == std::string::npos || x == 0 || x + 1 >= text.size()) return std::nullopt;
  const std::string l = text.substr(0, x), w = text.substr(x + 1);
  const auto digits = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (!digits(l) || !digits(w)) return std::nullopt;
  FixedGrid f{std::stoul(l), std::stoul(w)};
  if (f.cells_l < 1 || f.cells_w < 1) return std::nullopt;
  return f;
}

void validate_grid(const GridConfig& g) {
  if (const auto* f = std::get_if<FixedGrid>(&g)) {
    if (f->cells_l < 1 || f->cells_w < 1) throw Error(ErrorCode::InvalidArgument, "grid needs at least one cell");
    return;
  }
  const auto& a = std::get<AdaptiveGrid>(g);
  if (!(a.alpha > 0.0) || !(a.delta_min > 0.0) || !(a.delta_max >= a.delta_min)) {
    throw Error(ErrorCode::InvalidArgument, "adaptive grid needs alpha > 0 and 0 < delta_min <= delta_max");
  }
}

std::vector<GridConfig> reference_grids() {
  return {FixedGrid{10, 6}, FixedGrid{15, 10}, FixedGrid{20, 12}, FixedGrid{30, 20}, FixedGrid{105, 68}};
}

std::vector<double> reference_horizons() { return {3.0, 5.0, 10.0}; }

double adaptive_cell_size(const MotionStats& stats, const AdaptiveGrid& g) {
  if (!(stats.s_t > 0.0)) return g.delta_max;
  return std::min(g.delta_max, std::max(g.delta_min, g.alpha / stats.s_t));
}

FixedGrid grid_from_cell_size(double delta) {
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidArgument, "cell size must be positive");
  const auto l = static_cast<std::size_t>(std::ceil(kNormWidth / delta));
  const auto w = static_cast<std::size_t>(std::ceil(kNormHeight / delta));
  return {std::max<std::size_t>(1, l), std::max<std::size_t>(1, w)};
}

double cell_aspect(const FixedGrid& g, const PitchSpec& spec) {
  return (spec.length_m / static_cast<double>(g.cells_l)) / (spec.width_m / static_cast<double>(g.cells_w));
}

std::size_t OccupancyGrid::occupied_cells() const noexcept {
  return static_cast<std::size_t>(std::count_if(counts_.begin(), counts_.end(), [](auto c) { return c > 0; }));
}

void OccupancyGrid::accumulate(const OccupancyGrid& other) {
  if (other.rows_ != rows_ || other.cols_ != cols_) throw Error(ErrorCode::GridMismatch, "cannot sum grids of different shape");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  frame_count_ += other.frame_count_;
}

std::pair<std::size_t, std::size_t> cell_of(const NormalizedPoint& p, const FixedGrid& g) {
  const auto bin = [](double v, double lo, double extent, std::size_t cells) -> std::size_t {
    const double u = (v - lo) / extent * static_cast<double>(cells);
    if (!(u > 0.0)) return 0;
    const auto i = static_cast<std::size_t>(std::floor(u));
    return std::min(i, cells - 1);
  };
  return {bin(p.y, kNormYMin, kNormHeight, g.cells_w), bin(p.x, kNormXMin, kNormWidth, g.cells_l)};
}

OccupancyGrid build_occupancy(std::span<const NormalizedPoint> traj, const FixedGrid& g,
                              std::size_t horizon_frames) {
  if (horizon_frames > traj.size()) {
    throw Error(ErrorCode::HorizonUnderrun, "horizon of " + std::to_string(horizon_frames) +
                                                " frames exceeds trajectory of " + std::to_string(traj.size()));
  }
  OccupancyGrid grid(g.cells_w, g.cells_l);
  for (std::size_t t = 0; t < horizon_frames; ++t) {
    const auto [r, c] = cell_of(traj[t], g);
    grid.add(r, c);
  }
  return grid;
}

double spatial_occupancy_similarity(const OccupancyGrid& gt, const OccupancyGrid& pred) {
  if (gt.rows() != pred.rows() || gt.cols() != pred.cols()) {
    throw Error(ErrorCode::GridMismatch, "occupancy grids differ in shape");
  }
  std::size_t inter = 0, uni = 0;
  const auto a = gt.counts();
  const auto b = pred.counts();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] > 0, y = b[i] > 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<double> motion_vector(const OccupancyGrid& grid) {
  const auto c = grid.counts();
  return {c.begin(), c.end()};
}

double movement_similarity(std::span<const double> v_gt, std::span<const double> v_pred) {
  if (v_gt.size() != v_pred.size()) {
    throw Error(ErrorCode::DimensionError, "motion vectors differ in length (" + std::to_string(v_gt.size()) +
                                               " vs " + std::to_string(v_pred.size()) + ")");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  bool same = true;
  for (std::size_t i = 0; i < v_gt.size(); ++i) {
    dot += v_gt[i] * v_pred[i];
    na += v_gt[i] * v_gt[i];
    nb += v_pred[i] * v_pred[i];
    same = same && v_gt[i] == v_pred[i];
  }
  const bool zero_a = na == 0.0, zero_b = nb == 0.0;
  if (zero_a || zero_b) return (zero_a && zero_b) ? 1.0 : 0.0;
  if (same) return 1.0;
  const double cos = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(0.5 * (cos + 1.0), 0.0, 1.0);
}

double composite_score(double s_t, double s_v, ScoreMean mean) {
  if (!(s_t >= 0.0 && s_t <= 1.0) || !(s_v >= 0.0 && s_v <= 1.0)) {
    throw Error(ErrorCode::RangeError, "similarities must lie in [0,1]");
  }
  if (mean == ScoreMean::Harmonic) {
    return (s_t + s_v) > 0.0 ? 2.0 * s_t * s_v / (s_t + s_v) : 0.0;
  }
  return 0.5 * (s_t + s_v);
}

SimilarityResult compare(const OccupancyGrid& gt, const OccupancyGrid& pred, ScoreMean mean) {
  SimilarityResult r;
  r.s_t = spatial_occupancy_similarity(gt, pred);
  const auto a = motion_vector(gt);
  const auto b = motion_vector(pred);
  r.s_v = movement_similarity(a, b);
  r.score = composite_score(r.s_t, r.s_v, mean);
  return r;
}

std::size_t horizon_to_frames(double seconds, double fps) {
  if (!(seconds > 0.0) || !(fps > 0.0)) throw Error(ErrorCode::InvalidArgument, "horizon and fps must be positive");
  return static_cast<std::size_t>(std::llround(seconds * fps));
}

std::vector<EvalRow> evaluate_segment(const Segment& gt, const Segment& pred, std::span<const GridConfig> grids,
                                      std::span<const double> horizons, const EvalOptions& options) {
  if (options.target >= kNumAgents) throw Error(ErrorCode::InvalidArgument, "evaluation target out of range");
  const AgentId target(options.target);
  const auto gt_traj = gt.trajectory(target);
  const auto pred_traj = pred.trajectory(target);

  std::vector<EvalRow> rows;
  rows.reserve(grids.size() * horizons.size());
  for (const auto& g : grids) {
    validate_grid(g);
    for (double h : horizons) {
      const std::size_t frames = horizon_to_frames(h, gt.fps);
      if (pred_traj.size() < frames) {
        throw Error(ErrorCode::HorizonUnderrun, "prediction for " + gt.segment_id + " has " +
                                                    std::to_string(pred_traj.size()) + " frames, horizon " +
                                                    fmt_double(h) + " s needs " + std::to_string(frames));
      }
      if (gt_traj.size() < frames) {
        throw Error(ErrorCode::HorizonUnderrun, "ground truth " + gt.segment_id + " has " +
                                                    std::to_string(gt_traj.size()) + " frames, horizon " +
                                                    fmt_double(h) + " s needs " + std::to_string(frames));
      }
      FixedGrid resolved;
      if (const auto* f = std::get_if<FixedGrid>(&g)) {
        resolved = *f;
      } else {
        const auto window = std::span<const NormalizedPoint>(gt_traj).first(frames);
        const MotionStats stats = frames >= 2 ? displacement_stats(window, frames) : MotionStats{0.0, 1};
        resolved = grid_from_cell_size(adaptive_cell_size(stats, std::get<AdaptiveGrid>(g)));
      }
      auto og = build_occupancy(gt_traj, resolved, frames);
      auto op = build_occupancy(pred_traj, resolved, frames);

      EvalRow row;
      row.segment_id = gt.segment_id;
      row.grid = grid_label(g);
      row.resolved = resolved;
      row.horizon_s = h;
      row.horizon_frames = frames;
      row.result = compare(og, op, options.mean);
      if (options.keep_grids) {
        row.gt_grid = std::move(og);
        row.pred_grid = std::move(op);
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<SummaryCell> aggregate(std::span<const EvalRow> rows) {
  if (rows.empty()) throw Error(ErrorCode::EmptyReport, "no evaluation rows to aggregate");
  std::vector<SummaryCell> cells;
  std::map<std::pair<std::string, double>, std::size_t> index;
  std::vector<std::vector<const EvalRow*>> members;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.grid, r.horizon_s);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, cells.size()).first;
      cells.push_back({r.grid, r.horizon_s, 0, {}, {}, {}});
      members.emplace_back();
    }
    members[it->second].push_back(&r);
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& m = members[i];
    const auto n = static_cast<double>(m.size());
    const auto moments = [&](auto field) {
      double mean = 0.0;
      for (const auto* r : m) mean += field(*r);
      mean /= n;
      double var = 0.0;
      for (const auto* r : m) {
        const double d = field(*r) - mean;
        var += d * d;
      }
      return Moments{mean, std::sqrt(var / n)};
    };
    cells[i].count = m.size();
    cells[i].s_t = moments([](const EvalRow& r) { return r.result.s_t; });
    cells[i].s_v = moments([](const EvalRow& r) { return r.result.s_v; });
    cells[i].score = moments([](const EvalRow& r) { return r.result.score; });
  }
  return cells;
}

std::vector<EvalRow> evaluate_dataset(std::span<const SegmentPair> pairs, std::span<const GridConfig> grids,
                                      std::span<const double> horizons, const EvalOptions& options,
                                      Execution exec) {
  std::vector<std::vector<EvalRow>> per_pair(pairs.size());
  if (exec == Execution::Serial) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      per_pair[i] = evaluate_segment(*pairs[i].gt, *pairs[i].pred, grids, horizons, options);
    }
  } else {
    std::vector<std::exception_ptr> errors(pairs.size());
    const auto n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      try {
        per_pair[k] = evaluate_segment(*pairs[k].gt, *pairs[k].pred, grids, horizons, options);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::vector<EvalRow> rows;
  for (auto& v : per_pair) {
    for (auto& r : v) rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace pitchlab::metrics
