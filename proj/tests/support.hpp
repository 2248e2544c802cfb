#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pitchlab/geometry.hpp"
#include "pitchlab/nn.hpp"

namespace pitchlab::test {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Every agent follows `f(agent, frame)`.
template <typename F>
Segment make_segment(std::size_t frames, F&& f, std::string id = "seg", std::string match = "m0") {
  Segment s;
  s.segment_id = std::move(id);
  s.match_id = std::move(match);
  s.fps = 25.0;
  s.phase = {Phase::Transition, std::nullopt};
  s.frames.assign(frames, Frame(kNumAgents));
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < kNumAgents; ++i) s.frames[t][i] = f(i, t);
  }
  return s;
}

inline Segment stationary_segment(std::size_t frames, std::uint64_t seed, std::string id = "still") {
  std::mt19937_64 rng(seed);
  std::vector<Vec2> at(kNumAgents);
  for (auto& p : at) p = {uniform(rng, -0.9, 0.9), uniform(rng, -0.4, 0.4)};
  return make_segment(frames, [&](std::size_t i, std::size_t) { return at[i]; }, std::move(id));
}

/// Agents start at random points and move with constant per-frame velocity
/// small enough to stay in bounds for `frames` frames.
inline Segment linear_segment(std::size_t frames, std::uint64_t seed, double speed, std::string id = "lin") {
  std::mt19937_64 rng(seed);
  std::vector<Vec2> p0(kNumAgents), v(kNumAgents);
  const double span = speed * static_cast<double>(frames);
  for (std::size_t i = 0; i < kNumAgents; ++i) {
    const double a = uniform(rng, 0.0, 2.0 * M_PI);
    v[i] = {speed * std::cos(a), speed * std::sin(a)};
    p0[i] = {uniform(rng, -0.95 + span, 0.95 - span), uniform(rng, -0.4 + span, 0.4 - span)};
  }
  return make_segment(
      frames, [&](std::size_t i, std::size_t t) { return p0[i] + static_cast<double>(t) * v[i]; }, std::move(id));
}

/// A team drifting along a shared arc while each player circles its own spot.
inline Segment curved_team_segment(std::size_t frames, std::uint64_t seed, std::string id = "curve") {
  std::mt19937_64 rng(seed);
  const auto T = static_cast<double>(frames);
  const double R = uniform(rng, 0.25, 0.4), ph0 = uniform(rng, 0.0, 2 * M_PI);
  const double W = (uniform(rng, 0, 1) < 0.5 ? -1 : 1) * uniform(rng, 0.8, 1.6) / T;
  const double cx = uniform(rng, -0.3, 0.3), cy = uniform(rng, -0.05, 0.05);
  struct Spot {
    double ox, oy, a, ph, w;
  };
  std::vector<Spot> spots(kNumAgents);
  for (auto& s : spots) {
    s = {uniform(rng, -0.35, 0.35), uniform(rng, -0.15, 0.15), uniform(rng, 0.01, 0.04), uniform(rng, 0, 2 * M_PI),
         (uniform(rng, 0, 1) < 0.5 ? -1 : 1) * uniform(rng, 1.0, 3.0) / T};
  }
  return make_segment(
      frames,
      [&](std::size_t i, std::size_t t) {
        const auto& s = spots[i];
        const double k = static_cast<double>(t);
        const Vec2 p{cx + R * std::cos(ph0 + W * k) + s.ox + s.a * std::cos(s.ph + s.w * k),
                     0.5 * (cy + R * std::sin(ph0 + W * k)) + s.oy + s.a * std::sin(s.ph + s.w * k)};
        return clamp_to_bounds(p);
      },
      std::move(id));
}

/// Largest relative error between `grad` and central differences of `loss`
/// (step 1e-5) over `probes` random coordinates. Pairs where both values are
/// below `floor` in magnitude compare absolutely.
template <typename F>
double max_grad_error(nn::ParamSet params, const nn::ParamSet& grad, F&& loss, std::size_t probes,
                      std::uint64_t seed, double floor = 1e-7) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, params.size() - 1);
  double worst = 0.0;
  for (std::size_t k = 0; k < probes; ++k) {
    const std::size_t j = pick(rng);
    const double h = 1e-5, v = params.values()[j];
    params.values()[j] = v + h;
    const double up = loss(params);
    params.values()[j] = v - h;
    const double down = loss(params);
    params.values()[j] = v;
    const double fd = (up - down) / (2 * h), an = grad.values()[j];
    const double scale = std::max({std::abs(fd), std::abs(an), floor});
    worst = std::max(worst, std::abs(fd - an) / scale);
  }
  return worst;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("pitchlab-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace pitchlab::test
