#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <string>

#include "pitchlab/error.hpp"
#include "pitchlab/rollout.hpp"

namespace pitchlab::rollout {

void validate_context(const Context& ctx) {
  if (ctx.frames.empty()) throw Error(ErrorCode::InvalidArgument, "context needs at least one frame");
  for (const auto& f : ctx.frames) {
    if (f.size() != kNumAgents) throw Error(ErrorCode::InvalidArgument, "context frame without 23 agents");
    for (const auto& p : f) {
      if (!in_normalized_bounds(p)) throw Error(ErrorCode::OutOfBounds, "context point outside normalized bounds");
    }
  }
}

Frame Policy::advance(const Context& ctx) const {
  const Displacements d = step(ctx);
  Frame next = ctx.last();
  for (std::size_t a = 0; a < kNumAgents; ++a) next[a] += d[a];
  return next;
}

Displacements ConstantVelocityPolicy::step(const Context& ctx) const {
  Displacements d{};
  if (ctx.size() < 2) return d;
  const Frame& a = ctx.frames[ctx.size() - 2];
  const Frame& b = ctx.frames[ctx.size() - 1];
  for (std::size_t i = 0; i < kNumAgents; ++i) d[i] = b[i] - a[i];
  return d;
}

ReplayPolicy::ReplayPolicy(const Segment& gt, std::size_t start) : gt_(&gt), start_(start) {
  if (gt.frames.empty()) throw Error(ErrorCode::InvalidArgument, "replay source is empty");
}

std::size_t ReplayPolicy::source_frame(const Context& ctx) const {
  return std::min(start_ + ctx.step, gt_->frames.size() - 1);
}

Displacements ReplayPolicy::step(const Context& ctx) const {
  Displacements d{};
  const std::size_t k = source_frame(ctx);
  if (k + 1 >= gt_->frames.size()) return d;
  for (std::size_t i = 0; i < kNumAgents; ++i) d[i] = gt_->frames[k + 1][i] - gt_->frames[k][i];
  return d;
}

Frame ReplayPolicy::advance(const Context& ctx) const {
  const std::size_t k = source_frame(ctx);
  if (k + 1 >= gt_->frames.size()) return ctx.last();
  return gt_->frames[k + 1];
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_open(std::uint64_t bits) { return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53; }

}  // namespace

Displacements RandomWalkPolicy::step(const Context& ctx) const {
  Displacements d{};
  for (std::size_t i = 0; i < kNumAgents; ++i) {
    const std::uint64_t key = splitmix64(seed_ ^ splitmix64(ctx.step * kNumAgents + i));
    const double u1 = unit_open(key), u2 = unit_open(splitmix64(key));
    const double r = std::sqrt(-2.0 * std::log(u1));
    d[i] = {sigma_ * r * std::cos(2.0 * std::numbers::pi * u2), sigma_ * r * std::sin(2.0 * std::numbers::pi * u2)};
  }
  return d;
}

std::size_t RolloutConfig::max_context() const {
  std::size_t m = 1;
  for (auto l : context_lengths) m = std::max(m, l);
  return m;
}

void RolloutConfig::validate() const {
  if (horizon_frames < 1) throw Error(ErrorCode::InvalidArgument, "horizon_frames must be >= 1");
  if (predict_frames < 1) throw Error(ErrorCode::InvalidArgument, "predict_frames must be >= 1");
  if (context_lengths.empty()) throw Error(ErrorCode::InvalidArgument, "no context lengths configured");
  for (auto l : context_lengths) {
    if (l < 1) throw Error(ErrorCode::InvalidArgument, "context lengths must be >= 1");
  }
}

std::vector<Frame> rollout(const Policy& policy, std::span<const Frame> context, double fps,
                           std::size_t horizon_frames) {
  validate_context({context, fps, 0});
  std::vector<Frame> history(context.begin(), context.end());
  history.reserve(context.size() + horizon_frames);
  for (std::size_t h = 0; h < horizon_frames; ++h) {
    const Context ctx{std::span<const Frame>(history), fps, h};
    Frame next = policy.advance(ctx);
    if (next.size() != kNumAgents) {
      throw Error(ErrorCode::PolicyFault, policy.name() + " returned a frame without 23 agents at step " + std::to_string(h));
    }
    for (auto& p : next) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw Error(ErrorCode::PolicyFault, policy.name() + " produced a non-finite position at step " + std::to_string(h));
      }
      p = clamp_to_bounds(p);
    }
    history.push_back(std::move(next));
  }
  return {history.begin() + static_cast<std::ptrdiff_t>(context.size()), history.end()};
}

Segment predict_segment(const Policy& policy, const Segment& gt, std::size_t total_frames) {
  if (gt.frames.empty()) throw Error(ErrorCode::InvalidArgument, "segment has no frames");
  if (total_frames < 1) throw Error(ErrorCode::InvalidArgument, "need at least one frame");
  Segment out;
  out.segment_id = gt.segment_id;
  out.match_id = gt.match_id;
  out.fps = gt.fps;
  out.phase = gt.phase;
  out.frames.reserve(total_frames);
  out.frames.push_back(gt.frames.front());
  auto rest = rollout(policy, std::span<const Frame>(gt.frames).first(1), gt.fps, total_frames - 1);
  for (auto& f : rest) out.frames.push_back(std::move(f));
  return out;
}

metrics::EvalReport evaluate_policy(const PolicyFactory& factory, std::span<const Segment> testset,
                                    std::span<const metrics::GridConfig> grids, std::span<const double> horizons,
                                    const metrics::EvalOptions& options, metrics::Execution exec) {
  if (testset.empty()) throw Error(ErrorCode::EmptyReport, "test set is empty");
  if (horizons.empty()) throw Error(ErrorCode::InvalidArgument, "no horizons requested");
  const double max_h = *std::max_element(horizons.begin(), horizons.end());

  std::vector<Segment> preds(testset.size());
  std::vector<std::exception_ptr> errors(testset.size());
  const auto run = [&](std::size_t k) {
    try {
      const auto& gt = testset[k];
      const std::size_t frames = metrics::horizon_to_frames(max_h, gt.fps);
      if (gt.frames.size() < frames) {
        throw Error(ErrorCode::HorizonUnderrun, gt.segment_id + " is shorter than the longest horizon");
      }
      const auto policy = factory(gt);
      preds[k] = predict_segment(*policy, gt, frames);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  if (exec == metrics::Execution::Serial) {
    for (std::size_t k = 0; k < testset.size(); ++k) run(k);
  } else {
    const auto n = static_cast<std::ptrdiff_t>(testset.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < n; ++k) run(static_cast<std::size_t>(k));
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<metrics::SegmentPair> pairs(testset.size());
  for (std::size_t k = 0; k < testset.size(); ++k) pairs[k] = {&testset[k], &preds[k]};
  metrics::EvalReport report;
  report.rows = metrics::evaluate_dataset(pairs, grids, horizons, options, exec);
  report.summary = metrics::aggregate(report.rows);
  return report;
}

metrics::EvalReport evaluate_policy(const Policy& policy, std::span<const Segment> testset,
                                    std::span<const metrics::GridConfig> grids, std::span<const double> horizons,
                                    const metrics::EvalOptions& options, metrics::Execution exec) {
  // Non-owning handle; the caller keeps `policy` alive for the call.
  const std::shared_ptr<const Policy> shared(&policy, [](const Policy*) {});
  return evaluate_policy([&](const Segment&) { return shared; }, testset, grids, horizons, options, exec);
}

}  // namespace pitchlab::rollout
