#include "pitchlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pitchlab/error.hpp"

namespace pitchlab {

double norm(const Vec2& v) { return std::hypot(v.x, v.y); }

bool in_normalized_bounds(const NormalizedPoint& p) noexcept {
  return p.x >= kNormXMin && p.x <= kNormXMax && p.y >= kNormYMin && p.y <= kNormYMax;
}

NormalizedPoint clamp_to_bounds(const NormalizedPoint& p) noexcept {
  return {std::clamp(p.x, kNormXMin, kNormXMax), std::clamp(p.y, kNormYMin, kNormYMax)};
}

AgentId::AgentId(std::size_t index) : index_(index) {
  if (index >= kNumAgents) {
    throw Error(ErrorCode::InvalidArgument, "agent index " + std::to_string(index) + " outside [0,22]");
  }
}

bool PhaseLabel::valid() const noexcept {
  const bool needs_outcome = phase == Phase::Attack || phase == Phase::Defense;
  return needs_outcome == outcome.has_value();
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::Attack: return "Attack";
    case Phase::Defense: return "Defense";
    case Phase::Transition: return "Transition";
  }
  return "Transition";
}

std::string to_string(Outcome o) { return o == Outcome::Successful ? "Successful" : "Failed"; }

std::optional<Phase> parse_phase(const std::string& s) {
  if (s == "Attack") return Phase::Attack;
  if (s == "Defense") return Phase::Defense;
  if (s == "Transition") return Phase::Transition;
  return std::nullopt;
}

std::optional<Outcome> parse_outcome(const std::string& s) {
  if (s == "Successful") return Outcome::Successful;
  if (s == "Failed") return Outcome::Failed;
  return std::nullopt;
}

std::vector<NormalizedPoint> Segment::trajectory(AgentId agent) const {
  std::vector<NormalizedPoint> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.at(agent.index()));
  return out;
}

namespace {

std::string fmt_point(const Vec2& p) {
  std::ostringstream os;
  os << "(" << p.x << ", " << p.y << ")";
  return os.str();
}

}  // namespace

PitchPoint normalized_to_pitch(const NormalizedPoint& q, const PitchSpec& spec) {
  if (!in_normalized_bounds(q)) {
    throw Error(ErrorCode::OutOfBounds, "normalized point " + fmt_point(q) + " outside [-1,1]x[-0.42,0.42]");
  }
  return {(q.x + 1.0) * 0.5 * spec.length_m, (q.y + 0.42) / 0.84 * spec.width_m};
}

NormalizedPoint pitch_to_normalized(const PitchPoint& p, const PitchSpec& spec) {
  if (!(p.x >= 0.0 && p.x <= spec.length_m && p.y >= 0.0 && p.y <= spec.width_m)) {
    throw Error(ErrorCode::OutOfBounds, "pitch point " + fmt_point(p) + " outside the pitch");
  }
  return {2.0 * (p.x / spec.length_m) - 1.0, 0.84 * (p.y / spec.width_m) - 0.42};
}

std::vector<Violation> validate_segment(const Segment& s) {
  using K = Violation::Kind;
  std::vector<Violation> out;
  if (s.frames.empty()) out.push_back({K::Empty, 0, 0, "segment has no frames"});
  if (!(s.fps > 0.0) || !std::isfinite(s.fps)) out.push_back({K::BadFps, 0, 0, "fps must be positive"});
  if (!s.phase.valid()) out.push_back({K::BadPhase, 0, 0, "outcome must be present iff phase is Attack or Defense"});
  if (!s.observed.empty() && s.observed.size() != s.frames.size()) {
    out.push_back({K::MaskShape, 0, 0, "observation mask frame count differs from frames"});
  }

  for (std::size_t t = 0; t < s.frames.size(); ++t) {
    const auto& f = s.frames[t];
    if (f.size() < kNumAgents) {
      out.push_back({K::MissingAgent, t, f.size(),
                     "frame " + std::to_string(t) + " has " + std::to_string(f.size()) + " agents (missing agent)"});
    } else if (f.size() > kNumAgents) {
      out.push_back({K::ExtraAgent, t, kNumAgents, "frame " + std::to_string(t) + " has too many agents"});
    }
    if (!s.observed.empty() && t < s.observed.size() && s.observed[t].size() != f.size()) {
      out.push_back({K::MaskShape, t, 0, "mask width differs from frame width at frame " + std::to_string(t)});
    }
    for (std::size_t a = 0; a < f.size(); ++a) {
      const auto& p = f[a];
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        out.push_back({K::NonFinite, t, a, "non-finite coordinate at frame " + std::to_string(t)});
      } else if (!in_normalized_bounds(p)) {
        out.push_back({K::OutOfBounds, t, a,
                       "point " + fmt_point(p) + " out of bounds at frame " + std::to_string(t) +
                           ", agent " + std::to_string(a)});
      }
    }
  }
  return out;
}

MotionStats displacement_stats(std::span<const NormalizedPoint> traj, std::size_t window_frames) {
  if (traj.size() < 2) {
    throw Error(ErrorCode::InsufficientFrames, "need at least 2 frames, got " + std::to_string(traj.size()));
  }
  if (window_frames < 1 || window_frames > traj.size()) {
    throw Error(ErrorCode::InvalidArgument, "window must lie in [1, trajectory length]");
  }
  if (window_frames == 1) return {0.0, 1};
  const std::size_t first = traj.size() - window_frames;
  double total = 0.0;
  for (std::size_t i = first + 1; i < traj.size(); ++i) total += norm(traj[i] - traj[i - 1]);
  return {total / static_cast<double>(window_frames - 1), window_frames};
}

}  // namespace pitchlab
