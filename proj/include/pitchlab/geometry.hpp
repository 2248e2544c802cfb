#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pitchlab {

inline constexpr std::size_t kNumAgents = 23;
inline constexpr std::size_t kBallIndex = 22;

inline constexpr double kNormXMin = -1.0;
inline constexpr double kNormXMax = 1.0;
inline constexpr double kNormYMin = -0.42;
inline constexpr double kNormYMax = 0.42;
inline constexpr double kNormWidth = kNormXMax - kNormXMin;   // 2
inline constexpr double kNormHeight = kNormYMax - kNormYMin;  // 0.84

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
};

inline Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
inline Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
inline Vec2 operator*(double k, const Vec2& v) { return {k * v.x, k * v.y}; }
double norm(const Vec2& v);

/// Metric pitch dimensions in meters.
struct PitchSpec {
  double length_m = 105.0;
  double width_m = 68.0;
};

/// A position in the simulation frame: x in [-1, 1], y in [-0.42, 0.42].
using NormalizedPoint = Vec2;
/// A position on the metric pitch, origin at a corner.
using PitchPoint = Vec2;

bool in_normalized_bounds(const NormalizedPoint& p) noexcept;
NormalizedPoint clamp_to_bounds(const NormalizedPoint& p) noexcept;

/// Agent slots: 0..10 team A, 11..21 team B, 22 the ball.
class AgentId {
 public:
  explicit AgentId(std::size_t index);
  static AgentId ball() { return AgentId(kBallIndex); }
  std::size_t index() const noexcept { return index_; }
  friend bool operator==(const AgentId&, const AgentId&) = default;

 private:
  std::size_t index_;
};

enum class Phase { Attack, Defense, Transition };
enum class Outcome { Successful, Failed };

struct PhaseLabel {
  Phase phase = Phase::Transition;
  std::optional<Outcome> outcome;

  /// outcome must be present exactly for Attack and Defense.
  bool valid() const noexcept;
  friend bool operator==(const PhaseLabel&, const PhaseLabel&) = default;
};

std::string to_string(Phase p);
std::string to_string(Outcome o);
std::optional<Phase> parse_phase(const std::string& s);
std::optional<Outcome> parse_outcome(const std::string& s);

/// One position per agent slot; a well-formed frame has kNumAgents entries.
using Frame = std::vector<NormalizedPoint>;
/// 1 = observed, 0 = missing.
using FrameMask = std::vector<std::uint8_t>;

/// A possession clip. `observed` is either empty (everything observed) or has
/// one entry per frame.
struct Segment {
  std::string segment_id;
  std::string match_id;
  double fps = 25.0;
  PhaseLabel phase;
  std::vector<Frame> frames;
  std::vector<FrameMask> observed;

  std::size_t num_frames() const noexcept { return frames.size(); }
  bool is_observed(std::size_t frame, std::size_t agent) const noexcept {
    return observed.empty() || observed[frame][agent] != 0;
  }
  std::vector<NormalizedPoint> trajectory(AgentId agent) const;

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct MotionStats {
  double s_t = 0.0;
  std::size_t window_frames = 1;
};

PitchPoint normalized_to_pitch(const NormalizedPoint& q, const PitchSpec& spec = {});
NormalizedPoint pitch_to_normalized(const PitchPoint& p, const PitchSpec& spec = {});

/// One entry per violated invariant; empty means the segment is well formed.
struct Violation {
  enum class Kind { Empty, BadFps, MissingAgent, ExtraAgent, OutOfBounds, NonFinite, BadPhase, MaskShape };
  Kind kind;
  std::size_t frame = 0;
  std::size_t agent = 0;
  std::string message;
};

std::vector<Violation> validate_segment(const Segment& s);

/// Mean Euclidean step length over the last `window_frames - 1` steps.
MotionStats displacement_stats(std::span<const NormalizedPoint> traj, std::size_t window_frames);

}  // namespace pitchlab
