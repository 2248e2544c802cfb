#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "pitchlab/error.hpp"
#include "pitchlab/io.hpp"

namespace pitchlab::io {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::WingAttack: return "WingAttack";
    case Scenario::CentralBuildup: return "CentralBuildup";
    case Scenario::CounterAttack: return "CounterAttack";
    case Scenario::SetPiece: return "SetPiece";
    case Scenario::RandomWalk: return "RandomWalk";
  }
  return "RandomWalk";
}

std::optional<Scenario> parse_scenario(const std::string& s) {
  for (auto sc : all_scenarios()) {
    if (to_string(sc) == s) return sc;
  }
  return std::nullopt;
}

std::vector<Scenario> all_scenarios() {
  return {Scenario::WingAttack, Scenario::CentralBuildup, Scenario::CounterAttack, Scenario::SetPiece,
          Scenario::RandomWalk};
}

namespace {

// Team A shape (4-4-2) in its own half; team B mirrors it.
constexpr std::array<Vec2, 11> kBaseShape{{
    {-0.90, 0.00},
    {-0.60, -0.28}, {-0.62, -0.09}, {-0.62, 0.09}, {-0.60, 0.28},
    {-0.30, -0.28}, {-0.32, -0.09}, {-0.32, 0.09}, {-0.30, 0.28},
    {-0.05, -0.10}, {-0.05, 0.10},
}};

double uni(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::vector<Vec2> waypoints(Scenario sc, std::mt19937_64& rng) {
  const double side = uni(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
  switch (sc) {
    case Scenario::WingAttack:
      return {{uni(rng, -0.5, -0.2), side * uni(rng, 0.0, 0.15)},
              {uni(rng, -0.1, 0.1), side * uni(rng, 0.25, 0.35)},
              {uni(rng, 0.4, 0.6), side * uni(rng, 0.3, 0.38)},
              {uni(rng, 0.7, 0.8), side * uni(rng, 0.25, 0.35)},
              {uni(rng, 0.75, 0.88), side * uni(rng, -0.1, 0.1)}};
    case Scenario::CentralBuildup:
      return {{uni(rng, -0.75, -0.6), uni(rng, -0.1, 0.1)},
              {uni(rng, -0.5, -0.4), side * uni(rng, 0.15, 0.25)},
              {uni(rng, -0.35, -0.25), -side * uni(rng, 0.1, 0.2)},
              {uni(rng, -0.15, -0.05), side * uni(rng, 0.05, 0.15)},
              {uni(rng, 0.05, 0.2), uni(rng, -0.1, 0.1)}};
    case Scenario::CounterAttack:
      return {{uni(rng, -0.7, -0.5), uni(rng, -0.2, 0.2)},
              {uni(rng, -0.15, 0.0), side * uni(rng, 0.1, 0.25)},
              {uni(rng, 0.45, 0.6), side * uni(rng, 0.05, 0.2)},
              {uni(rng, 0.8, 0.9), uni(rng, -0.1, 0.1)}};
    case Scenario::SetPiece: {
      const bool corner = uni(rng, 0.0, 1.0) < 0.5;
      const Vec2 spot = corner ? Vec2{0.97, side * 0.40} : Vec2{uni(rng, 0.35, 0.6), uni(rng, -0.3, 0.3)};
      return {spot, spot, spot, {uni(rng, 0.8, 0.9), uni(rng, -0.08, 0.08)}, {uni(rng, 0.6, 0.75), uni(rng, -0.2, 0.2)}};
    }
    case Scenario::RandomWalk:
      break;
  }
  return {};
}

// Uniform Catmull-Rom through the waypoints, u in [0, 1].
Vec2 path_at(const std::vector<Vec2>& w, double u) {
  const std::size_t segs = w.size() - 1;
  const double x = std::clamp(u, 0.0, 1.0) * static_cast<double>(segs);
  const std::size_t k = std::min(static_cast<std::size_t>(x), segs - 1);
  const double s = x - static_cast<double>(k);
  const Vec2& p0 = w[k == 0 ? 0 : k - 1];
  const Vec2& p1 = w[k];
  const Vec2& p2 = w[k + 1];
  const Vec2& p3 = w[std::min(k + 2, segs)];
  const Vec2 m1 = 0.5 * (p2 - p0), m2 = 0.5 * (p3 - p1);
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * p1 + (s3 - 2 * s2 + s) * m1 + (-2 * s3 + 3 * s2) * p2 + (s3 - s2) * m2;
}

std::vector<Vec2> random_walk_path(std::size_t T, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.0015);
  std::vector<Vec2> out(T);
  Vec2 p{uni(rng, -0.5, 0.5), uni(rng, -0.25, 0.25)};
  Vec2 v{uni(rng, -0.006, 0.006), uni(rng, -0.004, 0.004)};
  for (std::size_t t = 0; t < T; ++t) {
    out[t] = p;
    v = Vec2{0.95 * v.x + n(rng), 0.95 * v.y + n(rng)};
    p += v;
    if (p.x < -0.95 || p.x > 0.95) { v.x = -v.x; p.x = std::clamp(p.x, -0.95, 0.95); }
    if (p.y < -0.38 || p.y > 0.38) { v.y = -v.y; p.y = std::clamp(p.y, -0.38, 0.38); }
  }
  return out;
}

PhaseLabel label_for(Scenario sc, std::mt19937_64& rng) {
  const Outcome o = uni(rng, 0.0, 1.0) < 0.5 ? Outcome::Successful : Outcome::Failed;
  switch (sc) {
    case Scenario::WingAttack:
    case Scenario::CentralBuildup:
    case Scenario::CounterAttack:
      return {Phase::Attack, o};
    case Scenario::SetPiece:
      return {uni(rng, 0.0, 1.0) < 0.5 ? Phase::Attack : Phase::Defense, o};
    case Scenario::RandomWalk:
      break;
  }
  return {Phase::Transition, std::nullopt};
}

}  // namespace

Segment generate_synthetic(const ScenarioSpec& spec) {
  if (!(spec.duration_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "duration must be positive");
  if (!(spec.noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise sigma must be non-negative");
  if (!(spec.fps > 0.0)) throw Error(ErrorCode::InvalidArgument, "fps must be positive");

  std::mt19937_64 rng(spec.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(spec.scenario) + 1);
  const auto T = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(spec.duration_s * spec.fps)));

  std::vector<Vec2> ball(T);
  if (spec.scenario == Scenario::RandomWalk) {
    ball = random_walk_path(T, rng);
  } else {
    const auto w = waypoints(spec.scenario, rng);
    for (std::size_t t = 0; t < T; ++t) ball[t] = path_at(w, static_cast<double>(t) / static_cast<double>(T - 1));
  }

  struct Wander {
    double ax, ay, fx, fy, px, py;
  };
  std::array<Wander, 22> wander{};
  for (auto& w : wander) {
    w = {uni(rng, 0.005, 0.02), uni(rng, 0.005, 0.02), uni(rng, 0.05, 0.2), uni(rng, 0.05, 0.2),
         uni(rng, 0.0, 2 * std::numbers::pi), uni(rng, 0.0, 2 * std::numbers::pi)};
  }

  Segment s;
  char buf[64];
  if (spec.segment_id.empty()) {
    std::snprintf(buf, sizeof buf, "%s-%08llu", to_string(spec.scenario).c_str(),
                  static_cast<unsigned long long>(spec.seed));
    s.segment_id = buf;
  } else {
    s.segment_id = spec.segment_id;
  }
  if (spec.match_id.empty()) {
    std::snprintf(buf, sizeof buf, "match-%04llu", static_cast<unsigned long long>(spec.seed % 10000));
    s.match_id = buf;
  } else {
    s.match_id = spec.match_id;
  }
  s.fps = spec.fps;
  s.phase = label_for(spec.scenario, rng);
  s.frames.assign(T, Frame(kNumAgents));

  // Off-ball players shift toward where the ball will be about a second later.
  const auto lead = static_cast<std::size_t>(std::llround(spec.fps));
  // Set pieces: outfielders crowd the penalty area until the ball is played,
  // then drift back into shape over `lead` frames.
  const double kick = 0.5 * static_cast<double>(T - 1);
  const auto dead_ball = [&](std::size_t t) {
    if (spec.scenario != Scenario::SetPiece) return 0.0;
    return std::clamp(1.0 - (static_cast<double>(t) - kick) / static_cast<double>(std::max<std::size_t>(lead, 1)),
                      0.0, 1.0);
  };
  std::normal_distribution<double> jitter(0.0, 1.0);
  for (std::size_t t = 0; t < T; ++t) {
    const Vec2 b = ball[t];
    const Vec2 ahead = ball[std::min(t + lead, T - 1)];
    const double time = static_cast<double>(t) / spec.fps;
    Frame& f = s.frames[t];
    for (std::size_t i = 0; i < 22; ++i) {
      const bool team_a = i < 11;
      const Vec2 base = kBaseShape[i % 11];
      const bool keeper = i % 11 == 0;
      Vec2 p;
      if (team_a) {
        p = {base.x + (keeper ? 0.1 : 0.6) * (ahead.x + 0.3), 0.85 * base.y + (keeper ? 0.1 : 0.35) * ahead.y};
      } else {
        p = {-base.x + (keeper ? 0.1 : 0.5) * (ahead.x - 0.3), 0.85 * base.y + (keeper ? 0.1 : 0.35) * ahead.y};
      }
      if (const double g = dead_ball(t); g > 0.0 && !keeper) {
        const auto k = static_cast<double>(i % 11);
        const Vec2 box = i % 11 == 10 && team_a ? b + Vec2{-0.02, 0.0}
                         : team_a                ? Vec2{0.74 + 0.05 * std::fmod(k, 3.0), -0.22 + 0.045 * k}
                                                 : Vec2{0.80 + 0.04 * std::fmod(k, 2.0), -0.20 + 0.04 * k};
        p = (1.0 - g) * p + g * box;
      }
      const auto& w = wander[i];
      p += Vec2{w.ax * std::sin(2 * std::numbers::pi * w.fx * time + w.px),
                w.ay * std::sin(2 * std::numbers::pi * w.fy * time + w.py)};
      if (team_a && !keeper) {
        // Attackers near the ball are drawn onto it; the weight fades smoothly.
        const Vec2 d = b - p;
        const double pull = 0.85 * std::exp(-(d.x * d.x + d.y * d.y) / 0.01);
        p += pull * (b + Vec2{-0.01, 0.0} - p);
      }
      f[i] = p;
    }
    f[kBallIndex] = b;
    for (auto& p : f) {
      if (spec.noise_sigma > 0.0) p += Vec2{spec.noise_sigma * jitter(rng), spec.noise_sigma * jitter(rng)};
      p = clamp_to_bounds(p);
      p = {quantize6(p.x), quantize6(p.y)};
    }
  }
  return s;
}

}  // namespace pitchlab::io
