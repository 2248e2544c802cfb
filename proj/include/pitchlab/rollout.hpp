#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pitchlab/geometry.hpp"
#include "pitchlab/metrics.hpp"
#include "pitchlab/nn.hpp"

namespace pitchlab::rollout {

using Displacements = std::array<Vec2, kNumAgents>;

/// Read-only view of the frames a policy may condition on, oldest first.
/// `step` counts frames produced since the rollout started (0 before the
/// first prediction).
struct Context {
  std::span<const Frame> frames;
  double fps = 25.0;
  std::size_t step = 0;

  const Frame& last() const { return frames.back(); }
  std::size_t size() const noexcept { return frames.size(); }
};

/// Throws InvalidArgument when the context is empty or malformed.
void validate_context(const Context& ctx);

/// A policy maps a context to per-agent displacements for the next frame.
/// Implementations must be safe to call concurrently.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Displacements step(const Context& ctx) const = 0;
  /// Next frame before clamping. Defaults to last frame + step(ctx); policies
  /// that know absolute targets may override it to avoid rounding drift.
  virtual Frame advance(const Context& ctx) const;
  virtual std::string name() const = 0;
};

class ZeroPolicy final : public Policy {
 public:
  Displacements step(const Context&) const override { return {}; }
  std::string name() const override { return "zero"; }
};

/// Repeats the last frame-to-frame difference; zero with a single frame.
class ConstantVelocityPolicy final : public Policy {
 public:
  Displacements step(const Context& ctx) const override;
  std::string name() const override { return "constant-velocity"; }
};

/// Re-emits the recorded motion of `gt` starting at frame `start`.
class ReplayPolicy final : public Policy {
 public:
  explicit ReplayPolicy(const Segment& gt, std::size_t start = 0);
  Displacements step(const Context& ctx) const override;
  Frame advance(const Context& ctx) const override;
  std::string name() const override { return "replay"; }

 private:
  std::size_t source_frame(const Context& ctx) const;
  const Segment* gt_;
  std::size_t start_;
};

/// Isotropic Gaussian steps, a pure function of (seed, step, agent).
class RandomWalkPolicy final : public Policy {
 public:
  RandomWalkPolicy(std::uint64_t seed, double sigma) : seed_(seed), sigma_(sigma) {}
  Displacements step(const Context& ctx) const override;
  std::string name() const override { return "random-walk"; }

 private:
  std::uint64_t seed_;
  double sigma_;
};

struct RolloutConfig {
  std::size_t horizon_frames = 250;
  std::vector<std::size_t> context_lengths{1, 10, 25, 50};
  std::size_t predict_frames = 25;
  std::size_t closed_loop_steps = 0;

  std::size_t max_context() const;
  void validate() const;
};

/// Autoregressive closed loop: each predicted frame is clamped to the pitch
/// and appended to the context. Returns only the predicted frames.
std::vector<Frame> rollout(const Policy& policy, std::span<const Frame> context, double fps,
                           std::size_t horizon_frames);

/// First frame of `gt` followed by `total_frames - 1` rolled-out frames, with
/// the metadata of `gt`.
Segment predict_segment(const Policy& policy, const Segment& gt, std::size_t total_frames);

// ----------------------------------------------------------------------------
// Behavior cloning

/// One hidden tanh layer from a flattened context window to 46 displacement
/// outputs. Inputs: positions of the newest frame, then consecutive frame
/// differences (oldest first) scaled by `velocity_scale`. Outputs are
/// displacements times `velocity_scale`.
class BCParams {
 public:
  BCParams() = default;
  BCParams(std::size_t context_frames, std::size_t hidden_dim, double velocity_scale = 25.0);

  static constexpr std::size_t kOutputs = 2 * kNumAgents;

  std::size_t context_frames() const noexcept { return context_frames_; }
  std::size_t hidden_dim() const noexcept { return hidden_dim_; }
  double velocity_scale() const noexcept { return velocity_scale_; }
  std::size_t input_dim() const noexcept { return kOutputs * context_frames_; }

  nn::ParamSet& params() noexcept { return p_; }
  const nn::ParamSet& params() const noexcept { return p_; }

  std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;

  friend bool operator==(const BCParams& a, const BCParams& b) {
    return a.context_frames_ == b.context_frames_ && a.hidden_dim_ == b.hidden_dim_ &&
           a.velocity_scale_ == b.velocity_scale_ && a.p_ == b.p_;
  }

 private:
  std::size_t context_frames_ = 1;
  std::size_t hidden_dim_ = 1;
  double velocity_scale_ = 25.0;
  nn::ParamSet p_;
};

/// Feature vector for the newest `params.context_frames()` frames of `frames`,
/// front-padded by repeating the earliest frame.
nn::Vector bc_features(const BCParams& params, std::span<const Frame> frames);

Displacements bc_predict(const BCParams& params, std::span<const Frame> frames);

struct BCExample {
  nn::Vector input;
  nn::Vector target;  // scaled displacement, length 46
  double weight = 1.0;
};

/// Weighted sum of squared errors over examples and its gradient.
struct BCLoss {
  double loss = 0.0;
  nn::ParamSet grad;
};
BCLoss bc_loss(const BCParams& params, std::span<const BCExample> batch);

class BCPolicy final : public Policy {
 public:
  explicit BCPolicy(BCParams params) : params_(std::move(params)) {}
  Displacements step(const Context& ctx) const override { return bc_predict(params_, ctx.frames); }
  std::string name() const override { return "bc"; }
  const BCParams& params() const noexcept { return params_; }

 private:
  BCParams params_;
};

struct BCTrainConfig {
  std::size_t hidden_dim = 64;
  std::size_t epochs = 100;
  std::size_t windows_per_epoch = 64;  // per context length
  std::size_t batch_windows = 8;       // per context length
  nn::OptimizerConfig optimizer{nn::OptimizerKind::Adam, 3e-3};
  double velocity_scale = 25.0;
  std::uint64_t seed = 0;
};

/// Teacher-forced multi-window training: every update draws windows for each
/// configured context length, unrolls `predict_frames` steps and averages the
/// per-length losses.
BCParams bc_train(std::span<const Segment> dataset, const RolloutConfig& cfg, const BCTrainConfig& train);

/// Loss of `params` on a deterministic set of teacher-forced windows; used to
/// compare training runs.
double bc_dataset_loss(const BCParams& params, std::span<const Segment> dataset, const RolloutConfig& cfg,
                       std::uint64_t seed, std::size_t windows_per_length = 16);

struct RefineResult {
  BCParams params;
  bool accepted = true;
  double rmse_before = 0.0;
  double rmse_after = 0.0;
};

/// Closed-loop fine-tuning: the first `cfg.closed_loop_steps` predictions are
/// fed back as context while targets are taken from ground truth. Rejected
/// (input params returned) if held-out rollout RMSE grows by more than 5 %.
RefineResult closed_loop_refine(const BCParams& params, std::span<const Segment> dataset,
                                std::span<const Segment> heldout, const RolloutConfig& cfg,
                                const BCTrainConfig& train);

/// RMSE over all agents of `predict_frames`-step rollouts started from
/// single-frame contexts at evenly spaced positions in each segment.
double rollout_rmse(const Policy& policy, std::span<const Segment> segments, std::size_t predict_frames,
                    std::size_t starts_per_segment = 4);

// ----------------------------------------------------------------------------
// Benchmark evaluation

using PolicyFactory = std::function<std::shared_ptr<const Policy>(const Segment& gt)>;

/// First-frame protocol: each test segment is rolled out from its first frame
/// to the longest horizon and scored against ground truth.
metrics::EvalReport evaluate_policy(const PolicyFactory& factory, std::span<const Segment> testset,
                                    std::span<const metrics::GridConfig> grids, std::span<const double> horizons,
                                    const metrics::EvalOptions& options = {},
                                    metrics::Execution exec = metrics::Execution::Parallel);

metrics::EvalReport evaluate_policy(const Policy& policy, std::span<const Segment> testset,
                                    std::span<const metrics::GridConfig> grids, std::span<const double> horizons,
                                    const metrics::EvalOptions& options = {},
                                    metrics::Execution exec = metrics::Execution::Parallel);

}  // namespace pitchlab::rollout
