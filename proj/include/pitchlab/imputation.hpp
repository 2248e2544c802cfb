#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pitchlab/geometry.hpp"
#include "pitchlab/nn.hpp"

namespace pitchlab::imputation {

/// N x T x 2 coordinates, agent-major: element (i, t, k) lives at (i*T + t)*2 + k.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t agents, std::size_t frames) : n_(agents), t_(frames), data_(agents * frames * 2, 0.0) {}

  std::size_t agents() const noexcept { return n_; }
  std::size_t frames() const noexcept { return t_; }
  double& operator()(std::size_t i, std::size_t t, std::size_t k) { return data_[(i * t_ + t) * 2 + k]; }
  double operator()(std::size_t i, std::size_t t, std::size_t k) const { return data_[(i * t_ + t) * 2 + k]; }
  Vec2 point(std::size_t i, std::size_t t) const { return {(*this)(i, t, 0), (*this)(i, t, 1)}; }
  void set(std::size_t i, std::size_t t, const Vec2& p) { (*this)(i, t, 0) = p.x; (*this)(i, t, 1) = p.y; }
  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t t_ = 0;
  std::vector<double> data_;
};

/// Partially observed trajectories. Unobserved entries of `x_obs` are zero.
struct ObservedSequence {
  Tensor3 x_obs;
  std::vector<std::uint8_t> mask;  // N x T, agent-major, 1 = observed
  double fps = 25.0;

  std::size_t agents() const noexcept { return x_obs.agents(); }
  std::size_t frames() const noexcept { return x_obs.frames(); }
  bool observed(std::size_t i, std::size_t t) const { return mask[i * frames() + t] != 0; }

  /// Zero-fills entries where the mask is 0 and checks shapes and bounds.
  static ObservedSequence make(Tensor3 x, std::vector<std::uint8_t> mask, double fps);
  static ObservedSequence from_segment(const Segment& s);
  static ObservedSequence fully_observed(const Tensor3& x, double fps);
};

struct LatentConfig {
  std::size_t latent_dim = 8;
  std::size_t hidden_dim = 64;
  double beta = 1.0;
  double lambda_smooth = 0.1;
  double lambda_form = 0.1;
  double lambda_coll = 0.1;
  double collision_radius = 0.01;

  void validate() const;
};

enum class Provenance : std::uint8_t { Observed, Spline, Model, Unresolved };

struct CompletedSequence {
  Tensor3 x_full;
  std::vector<Provenance> provenance;  // N x T, agent-major

  Provenance at(std::size_t i, std::size_t t) const { return provenance[i * x_full.frames() + t]; }
};

inline constexpr std::size_t kSplineMaxGap = 4;

/// Fills internal gaps of at most `max_gap` frames with cubic Hermite segments
/// whose end velocities are one-sided finite differences. Longer gaps and
/// leading/trailing gaps stay Unresolved.
CompletedSequence spline_impute(const ObservedSequence& seq, std::size_t max_gap = kSplineMaxGap);

/// Hermite fill over every internal gap regardless of length, with leading
/// and trailing gaps held at the nearest observation. Used as a conditioning
/// channel for the decoder.
Tensor3 guide_fill(const ObservedSequence& seq);

namespace detail {
/// Cubic Hermite on s in [0,1] between p0 and p1 with end tangents m0, m1
/// already scaled to the unit interval.
Vec2 hermite(const Vec2& p0, const Vec2& m0, const Vec2& p1, const Vec2& m1, double s);
Vec2 hermite_derivative(const Vec2& p0, const Vec2& m0, const Vec2& p1, const Vec2& m1, double s);
}  // namespace detail

/// Encoder: per-agent bidirectional GRU over [x*m, y*m, m]; the final forward
/// and backward states are averaged over agents and mapped to (mu, log var).
/// Decoder: per-agent GRU over [z, x*m, y*m, m, guide_x, guide_y]; the output
/// is the guide plus a linear correction from the hidden state and a skip from
/// the conditioning inputs.
class ImputerParams {
 public:
  ImputerParams() = default;
  explicit ImputerParams(const LatentConfig& cfg);

  static constexpr nn::Index kEncoderInput = 3;
  static constexpr nn::Index kConditionInput = 5;

  const LatentConfig& config() const noexcept { return cfg_; }
  LatentConfig& config() noexcept { return cfg_; }
  nn::ParamSet& params() noexcept { return p_; }
  const nn::ParamSet& params() const noexcept { return p_; }

  /// Glorot weights with a zero output head, so a fresh decoder reproduces the
  /// spline guide.
  void init_random(std::uint64_t seed);

  nn::GruLayout enc_fwd, enc_bwd, dec;
  std::size_t mu_w = 0, mu_b = 0, lv_w = 0, lv_b = 0, out_w = 0, skip_w = 0, out_b = 0;

  friend bool operator==(const ImputerParams& a, const ImputerParams& b) { return a.p_ == b.p_; }

 private:
  LatentConfig cfg_;
  nn::ParamSet p_;
};

struct Posterior {
  nn::Vector mu;
  nn::Vector log_var;
};

Posterior encode(const ImputerParams& params, const ObservedSequence& seq);
Tensor3 decode(const ImputerParams& params, const nn::Vector& z, const ObservedSequence& seq);

struct LossTerms {
  double reconstruction = 0.0;
  double kl = 0.0;
  double smooth = 0.0;
  double formation = 0.0;
  double collision = 0.0;
  double total = 0.0;
};

struct LossAndGrad {
  LossTerms terms;
  nn::ParamSet grad;
};

/// Masked single-sample reparameterized ELBO with the motion regularizers.
/// The reconstruction term covers unobserved entries only.
LossAndGrad elbo_loss(const ImputerParams& params, const ObservedSequence& seq, const Tensor3& x_true,
                      std::uint64_t seed);

/// Same objective with an explicit noise vector (length latent_dim).
LossAndGrad elbo_loss_with_noise(const ImputerParams& params, const ObservedSequence& seq, const Tensor3& x_true,
                                 const nn::Vector& eps);

struct DistillResult {
  double term = 0.0;
  nn::ParamSet grad;  // learner gradient only
};

/// weight * || learner(masked) - demonstrator(full) ||^2, both decoded at the
/// posterior mean. The demonstrator is treated as a constant.
DistillResult distill_step(const ImputerParams& learner, const ImputerParams& demonstrator,
                           const ObservedSequence& full, const ObservedSequence& masked, double weight);

struct TrainConfig {
  std::size_t epochs = 20;
  nn::OptimizerConfig optimizer{};
  double mask_rate = 0.3;
  std::size_t min_gap = 1;
  std::size_t max_gap = 20;
  bool time_reversal = true;
  std::size_t crop_frames = 0;      // 0 keeps full segments
  double velocity_noise = 0.0;      // sigma per unit of per-frame speed
  std::size_t max_agents = 0;       // 0 keeps all agents
  std::uint64_t seed = 0;
  const ImputerParams* demonstrator = nullptr;
  double distill_weight = 0.0;
};

struct TrainResult {
  ImputerParams params;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool reverted = false;  // true when the trained weights did not improve and the initial ones were kept
};

/// Random contiguous gaps per agent until roughly `rate` of frames are
/// masked. The first and last frame of every agent stay observed.
std::vector<std::uint8_t> random_gap_mask(std::size_t agents, std::size_t frames, double rate, std::size_t min_gap,
                                          std::size_t max_gap, std::mt19937_64& rng);

Tensor3 segment_tensor(const Segment& s);

TrainResult train_imputer(std::span<const Segment> dataset, const LatentConfig& cfg, const TrainConfig& train);

/// Short gaps go to spline_impute, everything else unobserved is filled by the
/// decoder at the posterior mean. Observed entries are copied bit for bit.
CompletedSequence impute(const ImputerParams& params, const ObservedSequence& seq);

}  // namespace pitchlab::imputation
