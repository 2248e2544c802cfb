#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "pitchlab/error.hpp"
#include "pitchlab/rollout.hpp"

namespace pitchlab::rollout {

using nn::Index;
using nn::Vector;

BCParams::BCParams(std::size_t context_frames, std::size_t hidden_dim, double velocity_scale)
    : context_frames_(context_frames), hidden_dim_(hidden_dim), velocity_scale_(velocity_scale) {
  if (context_frames < 1 || hidden_dim < 1) throw Error(ErrorCode::InvalidArgument, "BC sizes must be >= 1");
  if (!(velocity_scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "velocity scale must be positive");
  const auto in = static_cast<Index>(input_dim());
  const auto h = static_cast<Index>(hidden_dim);
  w1 = p_.add("hidden.W", h, in);
  b1 = p_.add("hidden.b", h, 1);
  w2 = p_.add("out.W", static_cast<Index>(kOutputs), h);
  b2 = p_.add("out.b", static_cast<Index>(kOutputs), 1);
}

Vector bc_features(const BCParams& params, std::span<const Frame> frames) {
  if (frames.empty()) throw Error(ErrorCode::InvalidArgument, "empty context");
  const std::size_t K = params.context_frames();
  const std::size_t have = std::min(K, frames.size());
  const auto window = frames.last(have);
  // Index j in [0, K) of the padded window maps onto window[max(0, j - pad)].
  const std::size_t pad = K - have;
  const auto at = [&](std::size_t j) -> const Frame& { return window[j < pad ? 0 : j - pad]; };

  Vector x(static_cast<Index>(params.input_dim()));
  const Frame& newest = window.back();
  if (newest.size() != kNumAgents) throw Error(ErrorCode::DimensionError, "context frame without 23 agents");
  for (std::size_t a = 0; a < kNumAgents; ++a) {
    x(static_cast<Index>(2 * a)) = newest[a].x;
    x(static_cast<Index>(2 * a + 1)) = newest[a].y;
  }
  const double s = params.velocity_scale();
  Index o = static_cast<Index>(BCParams::kOutputs);
  for (std::size_t j = 1; j < K; ++j) {
    const Frame& prev = at(j - 1);
    const Frame& cur = at(j);
    for (std::size_t a = 0; a < kNumAgents; ++a) {
      x(o++) = s * (cur[a].x - prev[a].x);
      x(o++) = s * (cur[a].y - prev[a].y);
    }
  }
  return x;
}

namespace {

Vector forward_raw(const BCParams& params, const Vector& x, Vector* hidden = nullptr) {
  const auto& p = params.params();
  const Vector h = (p.mat(params.w1) * x + p.mat(params.b1).col(0)).array().tanh().matrix();
  if (hidden) *hidden = h;
  return p.mat(params.w2) * h + p.mat(params.b2).col(0);
}

Vector scaled_target(const BCParams& params, const Frame& from, const Frame& to) {
  Vector t(static_cast<Index>(BCParams::kOutputs));
  for (std::size_t a = 0; a < kNumAgents; ++a) {
    t(static_cast<Index>(2 * a)) = params.velocity_scale() * (to[a].x - from[a].x);
    t(static_cast<Index>(2 * a + 1)) = params.velocity_scale() * (to[a].y - from[a].y);
  }
  return t;
}

std::vector<const Segment*> eligible(std::span<const Segment> data, std::size_t min_frames) {
  std::vector<const Segment*> out;
  for (const auto& s : data) {
    if (s.frames.size() >= min_frames) out.push_back(&s);
  }
  return out;
}

// Teacher-forced windows for every context length; each length contributes
// equally to the total.
std::vector<BCExample> teacher_forced_batch(const BCParams& params, std::span<const Segment> data,
                                            const RolloutConfig& cfg, std::size_t windows, std::mt19937_64& rng) {
  std::vector<BCExample> batch;
  const std::size_t pf = cfg.predict_frames;
  const double per_length = 1.0 / static_cast<double>(cfg.context_lengths.size());
  for (std::size_t L : cfg.context_lengths) {
    const auto pool = eligible(data, L + pf);
    if (pool.empty()) {
      throw Error(ErrorCode::InvalidArgument, "no segment is long enough for context " + std::to_string(L) + " + " +
                                                  std::to_string(pf) + " predicted frames");
    }
    const double w = per_length / static_cast<double>(windows * pf * BCParams::kOutputs);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t k = 0; k < windows; ++k) {
      const Segment& seg = *pool[pick(rng)];
      std::uniform_int_distribution<std::size_t> start(L - 1, seg.frames.size() - 1 - pf);
      const std::size_t s = start(rng);
      for (std::size_t j = 0; j < pf; ++j) {
        const std::size_t end = s + j;
        const auto frames = std::span<const Frame>(seg.frames).subspan(end + 1 - L, L);
        batch.push_back({bc_features(params, frames), scaled_target(params, seg.frames[end], seg.frames[end + 1]), w});
      }
    }
  }
  return batch;
}

}  // namespace

Displacements bc_predict(const BCParams& params, std::span<const Frame> frames) {
  const Vector y = forward_raw(params, bc_features(params, frames));
  Displacements d{};
  for (std::size_t a = 0; a < kNumAgents; ++a) {
    d[a] = {y(static_cast<Index>(2 * a)) / params.velocity_scale(), y(static_cast<Index>(2 * a + 1)) / params.velocity_scale()};
  }
  return d;
}

BCLoss bc_loss(const BCParams& params, std::span<const BCExample> batch) {
  const auto& p = params.params();
  BCLoss res{0.0, p.zeros_like()};
  if (batch.empty()) return res;
  const auto n = static_cast<Index>(batch.size());
  const auto in = static_cast<Index>(params.input_dim());
  const auto out = static_cast<Index>(BCParams::kOutputs);
  nn::Matrix X(in, n), T(out, n);
  Vector w(n);
  for (Index k = 0; k < n; ++k) {
    const auto& ex = batch[static_cast<std::size_t>(k)];
    if (ex.input.size() != in || ex.target.size() != out) {
      throw Error(ErrorCode::DimensionError, "BC example has the wrong width");
    }
    X.col(k) = ex.input;
    T.col(k) = ex.target;
    w(k) = ex.weight;
  }
  // Column-batched forward and backward; one GEMM per weight matrix.
  const nn::Matrix H = ((p.mat(params.w1) * X).colwise() + p.mat(params.b1).col(0)).array().tanh().matrix();
  const nn::Matrix E = ((p.mat(params.w2) * H).colwise() + p.mat(params.b2).col(0)) - T;
  res.loss = E.colwise().squaredNorm().dot(w);
  const nn::Matrix dY = 2.0 * (E * w.asDiagonal());
  res.grad.mat(params.w2).noalias() = dY * H.transpose();
  res.grad.mat(params.b2).col(0) = dY.rowwise().sum();
  const nn::Matrix dA = (p.mat(params.w2).transpose() * dY).cwiseProduct((1.0 - H.array().square()).matrix());
  res.grad.mat(params.w1).noalias() = dA * X.transpose();
  res.grad.mat(params.b1).col(0) = dA.rowwise().sum();
  return res;
}

BCParams bc_train(std::span<const Segment> dataset, const RolloutConfig& cfg, const BCTrainConfig& train) {
  cfg.validate();
  if (dataset.empty()) throw Error(ErrorCode::InvalidArgument, "training set is empty");
  if (train.batch_windows < 1) throw Error(ErrorCode::InvalidArgument, "batch_windows must be >= 1");
  BCParams params(cfg.max_context(), train.hidden_dim, train.velocity_scale);
  params.params().init_glorot(train.seed);
  std::mt19937_64 rng(train.seed);
  nn::Optimizer opt(train.optimizer);
  const std::size_t batches = std::max<std::size_t>(1, train.windows_per_epoch / train.batch_windows);
  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    for (std::size_t b = 0; b < batches; ++b) {
      const auto batch = teacher_forced_batch(params, dataset, cfg, train.batch_windows, rng);
      const BCLoss l = bc_loss(params, batch);
      if (!std::isfinite(l.loss) || !l.grad.all_finite()) {
        throw Error(ErrorCode::TrainingDiverged, "behavior cloning diverged at epoch " + std::to_string(epoch));
      }
      opt.step(params.params(), l.grad);
    }
  }
  return params;
}

double bc_dataset_loss(const BCParams& params, std::span<const Segment> dataset, const RolloutConfig& cfg,
                       std::uint64_t seed, std::size_t windows_per_length) {
  std::mt19937_64 rng(seed);
  const auto batch = teacher_forced_batch(params, dataset, cfg, windows_per_length, rng);
  return bc_loss(params, batch).loss;
}

double rollout_rmse(const Policy& policy, std::span<const Segment> segments, std::size_t predict_frames,
                    std::size_t starts_per_segment) {
  double sq = 0.0;
  std::size_t count = 0;
  for (const auto& seg : segments) {
    if (seg.frames.size() <= predict_frames) continue;
    const std::size_t last_start = seg.frames.size() - 1 - predict_frames;
    const std::size_t n = std::max<std::size_t>(1, starts_per_segment);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t s = n == 1 ? 0 : j * last_start / (n - 1);
      const auto pred = rollout(policy, std::span<const Frame>(seg.frames).subspan(s, 1), seg.fps, predict_frames);
      for (std::size_t k = 0; k < predict_frames; ++k) {
        for (std::size_t a = 0; a < kNumAgents; ++a) {
          const Vec2 e = pred[k][a] - seg.frames[s + 1 + k][a];
          sq += e.x * e.x + e.y * e.y;
          ++count;
        }
      }
    }
  }
  if (count == 0) throw Error(ErrorCode::InvalidArgument, "no segment is long enough for the rollout check");
  return std::sqrt(sq / static_cast<double>(count));
}

RefineResult closed_loop_refine(const BCParams& params, std::span<const Segment> dataset,
                                std::span<const Segment> heldout, const RolloutConfig& cfg,
                                const BCTrainConfig& train) {
  cfg.validate();
  const auto held = heldout.empty() ? dataset : heldout;
  RefineResult res{params, true, 0.0, 0.0};
  if (cfg.closed_loop_steps == 0) return res;
  if (train.batch_windows < 1) throw Error(ErrorCode::InvalidArgument, "batch_windows must be >= 1");

  res.rmse_before = rollout_rmse(BCPolicy(params), held, cfg.predict_frames);

  BCParams refined = params;
  std::mt19937_64 rng(train.seed ^ 0xc2b2ae3d27d4eb4fULL);
  nn::Optimizer opt(train.optimizer);
  const std::size_t steps = cfg.closed_loop_steps;
  const std::size_t batches = std::max<std::size_t>(1, train.windows_per_epoch / train.batch_windows);
  const double per_length = 1.0 / static_cast<double>(cfg.context_lengths.size());

  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<BCExample> batch;
      for (std::size_t L : cfg.context_lengths) {
        const auto pool = eligible(dataset, L + steps);
        if (pool.empty()) {
          throw Error(ErrorCode::InvalidArgument, "no segment is long enough for closed-loop refinement");
        }
        const double w = per_length / static_cast<double>(train.batch_windows * steps * BCParams::kOutputs);
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (std::size_t k = 0; k < train.batch_windows; ++k) {
          const Segment& seg = *pool[pick(rng)];
          std::uniform_int_distribution<std::size_t> start(L - 1, seg.frames.size() - 1 - steps);
          const std::size_t s = start(rng);
          std::vector<Frame> history(seg.frames.begin() + static_cast<std::ptrdiff_t>(s + 1 - L),
                                     seg.frames.begin() + static_cast<std::ptrdiff_t>(s + 1));
          for (std::size_t j = 0; j < steps; ++j) {
            const Frame& cur = history.back();
            batch.push_back({bc_features(refined, history), scaled_target(refined, cur, seg.frames[s + j + 1]), w});
            const Displacements d = bc_predict(refined, history);
            Frame next = cur;
            for (std::size_t a = 0; a < kNumAgents; ++a) next[a] = clamp_to_bounds(next[a] + d[a]);
            history.push_back(std::move(next));
          }
        }
      }
      const BCLoss l = bc_loss(refined, batch);
      if (!std::isfinite(l.loss) || !l.grad.all_finite()) {
        throw Error(ErrorCode::TrainingDiverged, "closed-loop refinement diverged at epoch " + std::to_string(epoch));
      }
      opt.step(refined.params(), l.grad);
    }
  }

  res.rmse_after = rollout_rmse(BCPolicy(refined), held, cfg.predict_frames);
  if (res.rmse_after <= 1.05 * res.rmse_before) {
    res.params = std::move(refined);
  } else {
    res.accepted = false;
  }
  return res;
}

}  // namespace pitchlab::rollout
