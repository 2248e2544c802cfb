#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "pitchlab/error.hpp"
#include "pitchlab/imputation.hpp"

namespace pitchlab::imputation {

std::vector<std::uint8_t> random_gap_mask(std::size_t agents, std::size_t frames, double rate, std::size_t min_gap,
                                          std::size_t max_gap, std::mt19937_64& rng) {
  std::vector<std::uint8_t> mask(agents * frames, 1);
  if (frames < 3 || rate <= 0.0) return mask;
  min_gap = std::max<std::size_t>(1, min_gap);
  max_gap = std::clamp<std::size_t>(max_gap, min_gap, frames - 2);
  const auto target = static_cast<std::size_t>(std::llround(rate * static_cast<double>(frames - 2)));
  std::uniform_int_distribution<std::size_t> len_dist(min_gap, max_gap);
  for (std::size_t i = 0; i < agents; ++i) {
    auto* row = mask.data() + i * frames;
    std::size_t masked = 0;
    for (std::size_t attempt = 0; masked < target && attempt < 8 * frames; ++attempt) {
      const std::size_t len = std::min(len_dist(rng), target - masked);
      std::uniform_int_distribution<std::size_t> start_dist(1, frames - 1 - len);
      const std::size_t start = start_dist(rng);
      for (std::size_t t = start; t < start + len; ++t) {
        if (row[t] != 0) {
          row[t] = 0;
          ++masked;
        }
      }
    }
  }
  return mask;
}

namespace {

struct Sample {
  ObservedSequence seq;
  Tensor3 truth;
  ObservedSequence full;
};

Sample make_sample(const Segment& seg, const TrainConfig& cfg, bool augment, std::mt19937_64& rng) {
  Tensor3 all = segment_tensor(seg);
  std::size_t T = all.frames();
  std::size_t t0 = 0;
  if (cfg.crop_frames > 0 && cfg.crop_frames < T) {
    std::uniform_int_distribution<std::size_t> d(0, T - cfg.crop_frames);
    t0 = d(rng);
    T = cfg.crop_frames;
  }
  std::vector<std::size_t> agents(all.agents());
  std::iota(agents.begin(), agents.end(), 0);
  if (cfg.max_agents > 0 && cfg.max_agents < agents.size()) {
    std::shuffle(agents.begin(), agents.end(), rng);
    agents.resize(cfg.max_agents);
    std::sort(agents.begin(), agents.end());
  }
  bool reverse = false;
  if (augment && cfg.time_reversal) reverse = std::bernoulli_distribution(0.5)(rng);

  Tensor3 truth(agents.size(), T);
  for (std::size_t a = 0; a < agents.size(); ++a) {
    for (std::size_t k = 0; k < T; ++k) {
      const std::size_t src = t0 + (reverse ? T - 1 - k : k);
      truth.set(a, k, all.point(agents[a], src));
    }
  }
  auto mask = random_gap_mask(agents.size(), T, cfg.mask_rate, cfg.min_gap, cfg.max_gap, rng);

  Tensor3 noisy = truth;
  if (augment && cfg.velocity_noise > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t a = 0; a < agents.size(); ++a) {
      for (std::size_t t = 1; t < T; ++t) {
        const double speed = norm(truth.point(a, t) - truth.point(a, t - 1));
        const double sd = cfg.velocity_noise * speed;
        const Vec2 p = truth.point(a, t) + Vec2{sd * normal(rng), sd * normal(rng)};
        noisy.set(a, t, clamp_to_bounds(p));
      }
    }
  }
  Sample s{ObservedSequence::make(noisy, std::move(mask), seg.fps), std::move(truth), {}};
  if (cfg.demonstrator != nullptr) s.full = ObservedSequence::fully_observed(s.truth, seg.fps);
  return s;
}

// Mean total loss over fixed masks and fixed noise; comparable across calls.
double probe_loss(const ImputerParams& params, const std::vector<Sample>& probes, std::uint64_t seed) {
  double sum = 0.0;
  for (std::size_t k = 0; k < probes.size(); ++k) {
    sum += elbo_loss(params, probes[k].seq, probes[k].truth, seed + k).terms.total;
  }
  return sum / static_cast<double>(probes.size());
}

}  // namespace

TrainResult train_imputer(std::span<const Segment> dataset, const LatentConfig& cfg, const TrainConfig& train) {
  if (dataset.empty()) throw Error(ErrorCode::InvalidArgument, "training set is empty");
  ImputerParams params(cfg);
  params.init_random(train.seed);

  std::mt19937_64 probe_rng(train.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Sample> probes;
  probes.reserve(dataset.size());
  for (const auto& seg : dataset) probes.push_back(make_sample(seg, train, false, probe_rng));
  const std::uint64_t probe_seed = train.seed * 7919 + 17;

  TrainResult res{params, probe_loss(params, probes, probe_seed), 0.0, false};

  std::mt19937_64 rng(train.seed);
  nn::Optimizer opt(train.optimizer);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const Sample s = make_sample(dataset[idx], train, true, rng);
      LossAndGrad lg;
      try {
        lg = elbo_loss(params, s.seq, s.truth, rng());
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NumericalInstability) {
          throw Error(ErrorCode::TrainingDiverged, "epoch " + std::to_string(epoch) + ": " + e.what());
        }
        throw;
      }
      if (train.demonstrator != nullptr && train.distill_weight > 0.0) {
        const auto d = distill_step(params, *train.demonstrator, s.full, s.seq, train.distill_weight);
        for (std::size_t k = 0; k < lg.grad.size(); ++k) lg.grad.values()[k] += d.grad.values()[k];
      }
      opt.step(params.params(), lg.grad);
      if (!params.params().all_finite()) {
        throw Error(ErrorCode::TrainingDiverged, "epoch " + std::to_string(epoch) + ": parameters became non-finite");
      }
    }
  }

  double final_loss = 0.0;
  try {
    final_loss = probe_loss(params, probes, probe_seed);
  } catch (const Error& e) {
    throw Error(ErrorCode::TrainingDiverged, std::string("final evaluation: ") + e.what());
  }
  if (!std::isfinite(final_loss)) throw Error(ErrorCode::TrainingDiverged, "final loss is not finite");
  if (final_loss <= res.initial_loss) {
    res.params = std::move(params);
    res.final_loss = final_loss;
  } else {
    res.final_loss = res.initial_loss;
    res.reverted = true;
  }
  return res;
}

}  // namespace pitchlab::imputation
