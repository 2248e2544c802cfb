#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pitchlab/error.hpp"
#include "pitchlab/io.hpp"
#include "pitchlab/metrics.hpp"
#include "support.hpp"

using namespace pitchlab;
using namespace pitchlab::metrics;

namespace {

// Brute-force binning oracle: scan cells for the one whose half-open box holds
// the point, with the far edges closed.
std::pair<std::size_t, std::size_t> oracle_cell(const Vec2& p, const FixedGrid& g) {
  const double cw = 2.0 / static_cast<double>(g.cells_l);
  const double ch = 0.84 / static_cast<double>(g.cells_w);
  std::size_t col = g.cells_l - 1, row = g.cells_w - 1;
  for (std::size_t c = 0; c < g.cells_l; ++c) {
    if (p.x < -1.0 + cw * static_cast<double>(c + 1)) {
      col = c;
      break;
    }
  }
  for (std::size_t r = 0; r < g.cells_w; ++r) {
    if (p.y < -0.42 + ch * static_cast<double>(r + 1)) {
      row = r;
      break;
    }
  }
  return {row, col};
}

// Points within rounding distance of a cell edge bin either way.
bool near_edge(const Vec2& p, const FixedGrid& g) {
  const double u = (p.x + 1.0) / 2.0 * static_cast<double>(g.cells_l);
  const double v = (p.y + 0.42) / 0.84 * static_cast<double>(g.cells_w);
  return std::abs(u - std::round(u)) < 1e-9 || std::abs(v - std::round(v)) < 1e-9;
}

OccupancyGrid grid_with(const FixedGrid& g, std::initializer_list<std::pair<std::size_t, std::size_t>> cells) {
  OccupancyGrid o(g.cells_w, g.cells_l);
  for (auto [r, c] : cells) o.add(r, c);
  return o;
}

double oracle_cos_sim(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 && bb == 0) return 1.0;
  if (aa == 0 || bb == 0) return 0.0;
  return 0.5 * (ab / std::sqrt(aa * bb) + 1.0);
}

}  // namespace

TEST_CASE("adaptive cell size clamps") {
  const AdaptiveGrid g{2.0, 0.5, 5.0};
  CHECK(adaptive_cell_size({10.0, 1}, g) == 0.5);
  CHECK(adaptive_cell_size({0.1, 1}, g) == 5.0);
  CHECK(adaptive_cell_size({1.0, 1}, g) == 2.0);
  CHECK(adaptive_cell_size({0.0, 1}, g) == 5.0);
}

TEST_CASE("adaptive cell size is non-increasing in motion") {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 1000; ++k) {
    const double lo = test::uniform(rng, 0.01, 0.5);
    const AdaptiveGrid g{test::uniform(rng, 0.001, 2.0), lo, lo + test::uniform(rng, 0.0, 1.0)};
    double prev = adaptive_cell_size({0.0, 1}, g);
    CHECK(prev == g.delta_max);
    for (double s = 1e-4; s < 100.0; s *= 1.5) {
      const double d = adaptive_cell_size({s, 1}, g);
      CHECK(d <= prev);
      CHECK(d >= g.delta_min);
      CHECK(d <= g.delta_max);
      prev = d;
    }
  }
}

TEST_CASE("grid from cell size") {
  CHECK(grid_from_cell_size(2.0) == FixedGrid{1, 1});
  CHECK(grid_from_cell_size(0.2) == FixedGrid{10, 5});
  CHECK(grid_from_cell_size(0.0667) == FixedGrid{static_cast<std::size_t>(std::ceil(2 / 0.0667)),
                                                 static_cast<std::size_t>(std::ceil(0.84 / 0.0667))});
  CHECK(grid_from_cell_size(0.0667) == FixedGrid{30, 13});
}

TEST_CASE("cell aspect of the reference grids") {
  CHECK(cell_aspect({15, 10}) == doctest::Approx(1.0294).epsilon(1e-3));
  CHECK(std::abs(cell_aspect({10, 6}) - 0.9265) < 1e-4);
  CHECK(std::abs(cell_aspect({105, 68}) - 1.0) < 1e-12);
  const std::vector<double> table{0.9259, 1.0294, 0.9259, 1.0294, 1.0005};
  const auto grids = reference_grids();
  REQUIRE(grids.size() == table.size());
  for (std::size_t k = 0; k < grids.size(); ++k) {
    CHECK(std::abs(cell_aspect(std::get<FixedGrid>(grids[k])) - table[k]) < 1e-3);
  }
}

TEST_CASE("grid labels round trip") {
  CHECK(grid_label(FixedGrid{15, 10}) == "15x10");
  CHECK(std::get<FixedGrid>(*parse_grid("30x20")) == FixedGrid{30, 20});
  const auto a = parse_grid("adaptive:0.5:0.05:0.5");
  REQUIRE(a.has_value());
  CHECK(std::get<AdaptiveGrid>(*a) == AdaptiveGrid{0.5, 0.05, 0.5});
  CHECK(parse_grid(grid_label(*a)) == a);
  CHECK_FALSE(parse_grid("15by10").has_value());
  CHECK_FALSE(parse_grid("0x10").has_value());
  CHECK_THROWS_AS(validate_grid(AdaptiveGrid{1.0, 0.5, 0.1}), Error);
}

TEST_CASE("build_occupancy examples") {
  const std::vector<Vec2> still(75, Vec2{0, 0});
  for (const auto& g : reference_grids()) {
    const auto o = build_occupancy(still, std::get<FixedGrid>(g), 75);
    CHECK(o.occupied_cells() == 1);
    CHECK(*std::max_element(o.counts().begin(), o.counts().end()) == 75);
  }

  std::vector<Vec2> sweep;
  for (int t = 0; t <= 100; ++t) sweep.push_back({-1.0 + 0.02 * t, 0.0});
  const auto o = build_occupancy(sweep, {10, 6}, sweep.size());
  CHECK(o.occupied_cells() == 10);
  CHECK(o.frame_count() == sweep.size());

  CHECK(cell_of({1.0, 0.42}, {15, 10}) == std::pair<std::size_t, std::size_t>{9, 14});
  CHECK(cell_of({-1.0, -0.42}, {15, 10}) == std::pair<std::size_t, std::size_t>{0, 0});
  CHECK_THROWS_AS(build_occupancy(still, {15, 10}, 76), Error);
}

TEST_CASE("binning agrees with the brute-force oracle") {
  std::mt19937_64 rng(4);
  std::vector<Vec2> diag;
  for (int t = 0; t < 250; ++t) {
    const double u = (t + 0.37) / 250.0;
    diag.push_back({-1.0 + 2.0 * u, -0.42 + 0.84 * u});
  }
  for (int k = 0; k < 2000; ++k) diag.push_back({test::uniform(rng, -1, 1), test::uniform(rng, -0.42, 0.42)});
  for (const auto& gc : reference_grids()) {
    const auto g = std::get<FixedGrid>(gc);
    for (const auto& p : diag) {
      if (!near_edge(p, g)) CHECK(cell_of(p, g) == oracle_cell(p, g));
    }
    const auto o = build_occupancy(std::span(diag).first(250), g, 250);
    std::vector<double> counts(g.cells_l * g.cells_w, 0.0);
    for (std::size_t t = 0; t < 250; ++t) {
      const auto [r, c] = oracle_cell(diag[t], g);
      counts[r * g.cells_l + c] += 1.0;
    }
    CHECK(motion_vector(o) == counts);
  }
}

TEST_CASE("spatial occupancy similarity") {
  const FixedGrid g{15, 10};
  const auto a = grid_with(g, {{1, 1}, {2, 2}});
  const auto b = grid_with(g, {{2, 2}, {3, 3}});
  CHECK(spatial_occupancy_similarity(a, a) == 1.0);
  CHECK(spatial_occupancy_similarity(a, grid_with(g, {{5, 5}})) == 0.0);
  CHECK(spatial_occupancy_similarity(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(spatial_occupancy_similarity(a, b) == spatial_occupancy_similarity(b, a));
  CHECK(spatial_occupancy_similarity(OccupancyGrid(10, 15), OccupancyGrid(10, 15)) == 1.0);
  try {
    spatial_occupancy_similarity(a, OccupancyGrid(6, 10));
    FAIL("expected GridMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GridMismatch);
  }
}

TEST_CASE("movement similarity conventions") {
  const std::vector<double> v{1, 2, 3}, anti{-1, -2, -3}, ortho{2, -1, 0}, zero{0, 0, 0};
  CHECK(movement_similarity(v, v) == 1.0);
  CHECK(std::abs(movement_similarity(v, anti) - 0.0) <= 1e-12);
  CHECK(std::abs(movement_similarity(v, ortho) - 0.5) <= 1e-12);
  CHECK(movement_similarity(zero, zero) == 1.0);
  CHECK(movement_similarity(zero, v) == 0.0);
  CHECK(movement_similarity(v, zero) == 0.0);
  CHECK_THROWS_AS(movement_similarity(v, std::vector<double>{1, 2}), Error);
  CHECK(motion_vector(OccupancyGrid(3, 4)) == std::vector<double>(12, 0.0));
}

TEST_CASE("movement similarity properties") {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 300; ++k) {
    std::vector<double> a(40), b(40);
    for (auto& x : a) x = std::floor(test::uniform(rng, 0, 4));
    for (auto& x : b) x = std::floor(test::uniform(rng, 0, 4));
    const double s = movement_similarity(a, b);
    CHECK(s == doctest::Approx(oracle_cos_sim(a, b)).epsilon(1e-12));
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    auto scaled = a;
    for (auto& x : scaled) x *= 7.5;
    CHECK(std::abs(movement_similarity(scaled, b) - s) <= 1e-12);

    std::vector<std::size_t> perm(a.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pa(a.size()), pb(b.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
      pa[i] = a[perm[i]];
      pb[i] = b[perm[i]];
    }
    CHECK(std::abs(movement_similarity(pa, pb) - s) <= 1e-12);
  }
  const std::vector<double> a{5, 0, 0, 1}, b{5, 0, 0, 1}, shuffled{0, 5, 1, 0};
  CHECK(movement_similarity(a, b) == 1.0);
  CHECK(movement_similarity(shuffled, b) < 1.0);
}

TEST_CASE("composite score") {
  CHECK(composite_score(1, 1) == 1.0);
  CHECK(composite_score(0.4, 0.6) == 0.5);
  CHECK(composite_score(0, 1) == 0.5);
  CHECK(composite_score(0, 1, ScoreMean::Harmonic) == 0.0);
  CHECK(composite_score(0.5, 0.5, ScoreMean::Harmonic) == doctest::Approx(0.5));
  CHECK_THROWS_AS(composite_score(1.2, 0.5), Error);
  CHECK_THROWS_AS(composite_score(0.5, -0.1), Error);
}

TEST_CASE("compare stays in range and hits 1 only on agreement") {
  std::mt19937_64 rng(12);
  const FixedGrid g{10, 6};
  for (int k = 0; k < 200; ++k) {
    OccupancyGrid a(g.cells_w, g.cells_l), b(g.cells_w, g.cells_l);
    for (int n = 0; n < 5; ++n) a.add(rng() % g.cells_w, rng() % g.cells_l);
    for (int n = 0; n < 5; ++n) b.add(rng() % g.cells_w, rng() % g.cells_l);
    const auto r = compare(a, b);
    CHECK(r.score == 0.5 * (r.s_t + r.s_v));
    for (double v : {r.s_t, r.s_v, r.score}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK((r.score == 1.0) == (r.s_t == 1.0 && r.s_v == 1.0));
  }
}

TEST_CASE("horizon frames") {
  CHECK(horizon_to_frames(3.0, 25.0) == 75);
  CHECK(horizon_to_frames(5.0, 25.0) == 125);
  CHECK(horizon_to_frames(10.0, 25.0) == 250);
  CHECK(horizon_to_frames(0.1, 30.0) == 3);
}

TEST_CASE("evaluate_segment") {
  io::ScenarioSpec spec;
  spec.scenario = io::Scenario::WingAttack;
  spec.seed = 3;
  const Segment gt = io::generate_synthetic(spec);
  const auto grids = reference_grids();
  const auto horizons = reference_horizons();

  SUBCASE("perfect replay") {
    const auto rows = evaluate_segment(gt, gt, grids, horizons);
    CHECK(rows.size() == grids.size() * horizons.size());
    for (const auto& r : rows) {
      CHECK(r.result.s_t == 1.0);
      CHECK(r.result.s_v == 1.0);
      CHECK(r.result.score == 1.0);
      CHECK(r.segment_id == gt.segment_id);
    }
  }
  SUBCASE("mirrored prediction shares no cells") {
    // The wing attack runs through the right half; a point reflection puts
    // the prediction in the opposite half once the ball leaves the center.
    Segment pred = gt;
    for (auto& f : pred.frames) {
      for (auto& p : f) p = {-p.x, -p.y};
    }
    std::vector<GridConfig> one{FixedGrid{10, 6}};
    const std::vector<double> h{10.0};
    Segment late_gt = gt, late_pred = pred;
    late_gt.frames.erase(late_gt.frames.begin(), late_gt.frames.begin() + 75);
    late_pred.frames.erase(late_pred.frames.begin(), late_pred.frames.begin() + 75);
    const std::vector<double> h4{4.0};
    const auto rows = evaluate_segment(late_gt, late_pred, one, h4);
    CHECK(rows.front().result.s_t == 0.0);
    CHECK(h.size() == 1);
  }
  SUBCASE("constant-velocity prediction matches the composed oracle") {
    Segment pred = gt;
    const Vec2 v = gt.frames[1][kBallIndex] - gt.frames[0][kBallIndex];
    for (std::size_t t = 0; t < pred.frames.size(); ++t) {
      pred.frames[t][kBallIndex] = clamp_to_bounds(gt.frames[0][kBallIndex] + static_cast<double>(t) * v);
    }
    const FixedGrid g{15, 10};
    const std::vector<GridConfig> one{g};
    const std::vector<double> h{3.0};
    const auto row = evaluate_segment(gt, pred, one, h).front();
    std::vector<double> cg(150, 0.0), cp(150, 0.0);
    for (std::size_t t = 0; t < 75; ++t) {
      const auto [r1, c1] = oracle_cell(gt.frames[t][kBallIndex], g);
      const auto [r2, c2] = oracle_cell(pred.frames[t][kBallIndex], g);
      cg[r1 * 15 + c1] += 1;
      cp[r2 * 15 + c2] += 1;
    }
    double inter = 0, uni = 0;
    for (std::size_t k = 0; k < 150; ++k) {
      inter += (cg[k] > 0 && cp[k] > 0);
      uni += (cg[k] > 0 || cp[k] > 0);
    }
    CHECK(row.result.s_t == doctest::Approx(inter / uni).epsilon(1e-14));
    CHECK(row.result.s_v == doctest::Approx(oracle_cos_sim(cg, cp)).epsilon(1e-12));
    CHECK(row.result.score == doctest::Approx(0.5 * (inter / uni + oracle_cos_sim(cg, cp))).epsilon(1e-12));
  }
  SUBCASE("short prediction is a horizon underrun") {
    Segment pred = gt;
    pred.frames.resize(100);
    try {
      evaluate_segment(gt, pred, grids, horizons);
      FAIL("expected HorizonUnderrun");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::HorizonUnderrun);
      CHECK(std::string(e.what()).find("5") != std::string::npos);
    }
  }
  SUBCASE("adaptive grids resolve from the ground-truth motion") {
    const AdaptiveGrid ag{0.02, 0.05, 0.5};
    const std::vector<GridConfig> one{ag};
    const std::vector<double> h{3.0};
    const auto row = evaluate_segment(gt, gt, one, h).front();
    const auto traj = gt.trajectory(AgentId::ball());
    const double d = adaptive_cell_size(displacement_stats(std::span(traj).first(75), 75), ag);
    CHECK(row.resolved == grid_from_cell_size(d));
    CHECK(row.result.score == 1.0);
  }
}

TEST_CASE("aggregate") {
  EvalRow r;
  r.segment_id = "a";
  r.grid = "15x10";
  r.horizon_s = 3.0;
  r.result = {0.2, 0.4, 0.3};
  SUBCASE("single row") {
    const auto s = aggregate(std::vector<EvalRow>{r});
    REQUIRE(s.size() == 1);
    CHECK(s[0].score.mean == 0.3);
    CHECK(s[0].score.stddev == 0.0);
  }
  SUBCASE("two rows use the population deviation") {
    EvalRow r2 = r;
    r2.result = {0.4, 0.4, 0.4};
    const auto s = aggregate(std::vector<EvalRow>{r, r2});
    CHECK(s[0].s_t.mean == doctest::Approx(0.3));
    CHECK(s[0].s_t.stddev == doctest::Approx(0.1));
    CHECK(s[0].count == 2);
  }
  SUBCASE("matches a streaming recomputation") {
    std::mt19937_64 rng(5);
    std::vector<EvalRow> rows;
    for (int k = 0; k < 100; ++k) {
      EvalRow x = r;
      x.grid = k % 2 ? "15x10" : "10x6";
      const double st = test::uniform(rng, 0, 1), sv = test::uniform(rng, 0, 1);
      x.result = {st, sv, 0.5 * (st + sv)};
      rows.push_back(x);
    }
    const auto s = aggregate(rows);
    REQUIRE(s.size() == 2);
    CHECK(s[0].grid == "10x6");
    for (const auto& cell : s) {
      // Welford's update as an independent oracle.
      double mean = 0, m2 = 0;
      std::size_t n = 0;
      for (const auto& x : rows) {
        if (x.grid != cell.grid) continue;
        ++n;
        const double d = x.result.score - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x.result.score - mean);
      }
      CHECK(cell.count == n);
      CHECK(cell.score.mean == doctest::Approx(mean).epsilon(1e-12));
      CHECK(cell.score.stddev == doctest::Approx(std::sqrt(m2 / static_cast<double>(n))).epsilon(1e-10));
    }
  }
  SUBCASE("empty input") {
    try {
      aggregate(std::vector<EvalRow>{});
      FAIL("expected EmptyReport");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyReport);
    }
  }
}

TEST_CASE("parallel evaluation equals the serial reference") {
  std::vector<Segment> gts, preds;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    io::ScenarioSpec spec;
    spec.scenario = io::all_scenarios()[seed % 5];
    spec.seed = seed;
    gts.push_back(io::generate_synthetic(spec));
    Segment p = gts.back();
    for (auto& f : p.frames) f[kBallIndex] = clamp_to_bounds(f[kBallIndex] + Vec2{0.05, -0.03});
    preds.push_back(std::move(p));
  }
  std::vector<SegmentPair> pairs;
  for (std::size_t k = 0; k < gts.size(); ++k) pairs.push_back({&gts[k], &preds[k]});
  auto grids = reference_grids();
  grids.push_back(AdaptiveGrid{0.05, 0.05, 0.5});
  const auto horizons = reference_horizons();
  const auto a = evaluate_dataset(pairs, grids, horizons, {}, Execution::Serial);
  const auto b = evaluate_dataset(pairs, grids, horizons, {}, Execution::Parallel);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].segment_id == b[k].segment_id);
    CHECK(a[k].grid == b[k].grid);
    CHECK(a[k].result.score == b[k].result.score);
    CHECK(a[k].result.s_t == b[k].result.s_t);
  }
}
