#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>

#include "pitchlab/error.hpp"
#include "pitchlab/imputation.hpp"

namespace pitchlab::imputation {

using nn::Index;
using nn::Matrix;
using nn::Vector;

void LatentConfig::validate() const {
  if (latent_dim < 1 || hidden_dim < 1) throw Error(ErrorCode::InvalidArgument, "latent and hidden sizes must be >= 1");
  if (!(beta >= 0.0) || !(lambda_smooth >= 0.0) || !(lambda_form >= 0.0) || !(lambda_coll >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "loss weights must be non-negative");
  }
  if (!(collision_radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "collision radius must be positive");
}

ObservedSequence ObservedSequence::make(Tensor3 x, std::vector<std::uint8_t> mask, double fps) {
  if (mask.size() != x.agents() * x.frames()) {
    throw Error(ErrorCode::DimensionError, "mask has " + std::to_string(mask.size()) + " entries, expected " +
                                               std::to_string(x.agents() * x.frames()));
  }
  if (x.agents() < 1 || x.frames() < 1) throw Error(ErrorCode::DimensionError, "empty sequence");
  for (std::size_t i = 0; i < x.agents(); ++i) {
    for (std::size_t t = 0; t < x.frames(); ++t) {
      if (mask[i * x.frames() + t] == 0) {
        x.set(i, t, {0.0, 0.0});
      } else if (!in_normalized_bounds(x.point(i, t))) {
        throw Error(ErrorCode::OutOfBounds, "observed entry (" + std::to_string(i) + ", " + std::to_string(t) +
                                                ") outside normalized bounds");
      }
    }
  }
  return {std::move(x), std::move(mask), fps};
}

ObservedSequence ObservedSequence::from_segment(const Segment& s) {
  const std::size_t T = s.frames.size();
  Tensor3 x = segment_tensor(s);
  std::vector<std::uint8_t> mask(kNumAgents * T, 1);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < kNumAgents; ++i) mask[i * T + t] = s.is_observed(t, i) ? 1 : 0;
  }
  return make(std::move(x), std::move(mask), s.fps);
}

ObservedSequence ObservedSequence::fully_observed(const Tensor3& x, double fps) {
  return make(x, std::vector<std::uint8_t>(x.agents() * x.frames(), 1), fps);
}

Tensor3 segment_tensor(const Segment& s) {
  Tensor3 x(kNumAgents, s.frames.size());
  for (std::size_t t = 0; t < s.frames.size(); ++t) {
    if (s.frames[t].size() != kNumAgents) throw Error(ErrorCode::DimensionError, "frame without 23 agents");
    for (std::size_t i = 0; i < kNumAgents; ++i) x.set(i, t, s.frames[t][i]);
  }
  return x;
}

ImputerParams::ImputerParams(const LatentConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  const auto L = static_cast<Index>(cfg.latent_dim);
  const auto H = static_cast<Index>(cfg.hidden_dim);
  enc_fwd = nn::GruLayout::add(p_, "enc_fwd", kEncoderInput, H);
  enc_bwd = nn::GruLayout::add(p_, "enc_bwd", kEncoderInput, H);
  mu_w = p_.add("mu.W", L, 2 * H);
  mu_b = p_.add("mu.b", L, 1);
  lv_w = p_.add("logvar.W", L, 2 * H);
  lv_b = p_.add("logvar.b", L, 1);
  dec = nn::GruLayout::add(p_, "dec", L + kConditionInput, H);
  out_w = p_.add("out.W", 2, H);
  skip_w = p_.add("out.skip", 2, kConditionInput);
  out_b = p_.add("out.b", 2, 1);
}

void ImputerParams::init_random(std::uint64_t seed) {
  p_.init_glorot(seed);
  p_.mat(out_w).setZero();
  p_.mat(skip_w).setZero();
}

namespace {

void check_shapes(const ImputerParams& params, const ObservedSequence& seq) {
  if (params.params().size() == 0) throw Error(ErrorCode::DimensionError, "parameters are not initialized");
  if (seq.mask.size() != seq.agents() * seq.frames() || seq.agents() == 0 || seq.frames() == 0) {
    throw Error(ErrorCode::DimensionError, "sequence shape is inconsistent");
  }
}

struct EncoderCache {
  std::vector<std::vector<nn::GruStep>> fwd, bwd;
  Vector pooled;
  Posterior post;
};

Matrix encoder_inputs(const ObservedSequence& seq, std::size_t i, bool reversed) {
  const std::size_t T = seq.frames();
  Matrix in(ImputerParams::kEncoderInput, static_cast<Index>(T));
  for (std::size_t k = 0; k < T; ++k) {
    const std::size_t t = reversed ? T - 1 - k : k;
    const double m = seq.observed(i, t) ? 1.0 : 0.0;
    in(0, static_cast<Index>(k)) = m * seq.x_obs(i, t, 0);
    in(1, static_cast<Index>(k)) = m * seq.x_obs(i, t, 1);
    in(2, static_cast<Index>(k)) = m;
  }
  return in;
}

EncoderCache run_encoder(const ImputerParams& params, const ObservedSequence& seq) {
  const auto& p = params.params();
  const Index H = static_cast<Index>(params.config().hidden_dim);
  EncoderCache c;
  c.fwd.resize(seq.agents());
  c.bwd.resize(seq.agents());
  c.pooled = Vector::Zero(2 * H);
  for (std::size_t i = 0; i < seq.agents(); ++i) {
    c.fwd[i] = nn::gru_forward(p, params.enc_fwd, encoder_inputs(seq, i, false));
    c.bwd[i] = nn::gru_forward(p, params.enc_bwd, encoder_inputs(seq, i, true));
    c.pooled.head(H) += c.fwd[i].back().h;
    c.pooled.tail(H) += c.bwd[i].back().h;
  }
  c.pooled /= static_cast<double>(seq.agents());
  c.post.mu = p.mat(params.mu_w) * c.pooled + p.mat(params.mu_b).col(0);
  c.post.log_var = p.mat(params.lv_w) * c.pooled + p.mat(params.lv_b).col(0);
  return c;
}

void backward_encoder(const ImputerParams& params, const ObservedSequence& seq, const EncoderCache& c,
                      const Vector& d_mu, const Vector& d_logvar, nn::ParamSet& grad) {
  const auto& p = params.params();
  const Index H = static_cast<Index>(params.config().hidden_dim);
  grad.mat(params.mu_w).noalias() += d_mu * c.pooled.transpose();
  grad.mat(params.mu_b).col(0) += d_mu;
  grad.mat(params.lv_w).noalias() += d_logvar * c.pooled.transpose();
  grad.mat(params.lv_b).col(0) += d_logvar;
  const Vector d_pooled = (p.mat(params.mu_w).transpose() * d_mu + p.mat(params.lv_w).transpose() * d_logvar) /
                          static_cast<double>(seq.agents());
  const Index T = static_cast<Index>(seq.frames());
  for (std::size_t i = 0; i < seq.agents(); ++i) {
    Matrix dh = Matrix::Zero(H, T);
    dh.col(T - 1) = d_pooled.head(H);
    nn::gru_backward(p, params.enc_fwd, c.fwd[i], dh, grad, nullptr);
    dh.col(T - 1) = d_pooled.tail(H);
    nn::gru_backward(p, params.enc_bwd, c.bwd[i], dh, grad, nullptr);
  }
}

struct DecoderCache {
  std::vector<std::vector<nn::GruStep>> steps;
  std::vector<Matrix> cond;  // kConditionInput x T per agent
  Tensor3 out;
};

DecoderCache run_decoder(const ImputerParams& params, const Vector& z, const ObservedSequence& seq) {
  const auto& p = params.params();
  const Index L = static_cast<Index>(params.config().latent_dim);
  if (z.size() != L) {
    throw Error(ErrorCode::DimensionError, "latent vector has " + std::to_string(z.size()) + " entries, expected " +
                                               std::to_string(L));
  }
  const std::size_t T = seq.frames();
  const Tensor3 guide = guide_fill(seq);
  DecoderCache c;
  c.steps.resize(seq.agents());
  c.cond.resize(seq.agents());
  c.out = Tensor3(seq.agents(), T);
  const auto wo = p.mat(params.out_w), vo = p.mat(params.skip_w), bo = p.mat(params.out_b);
  for (std::size_t i = 0; i < seq.agents(); ++i) {
    Matrix cond(ImputerParams::kConditionInput, static_cast<Index>(T));
    for (std::size_t t = 0; t < T; ++t) {
      const double m = seq.observed(i, t) ? 1.0 : 0.0;
      const auto k = static_cast<Index>(t);
      cond(0, k) = m * seq.x_obs(i, t, 0);
      cond(1, k) = m * seq.x_obs(i, t, 1);
      cond(2, k) = m;
      cond(3, k) = guide(i, t, 0);
      cond(4, k) = guide(i, t, 1);
    }
    Matrix in(L + ImputerParams::kConditionInput, static_cast<Index>(T));
    in.topRows(L) = z.replicate(1, static_cast<Index>(T));
    in.bottomRows(ImputerParams::kConditionInput) = cond;
    c.steps[i] = nn::gru_forward(p, params.dec, in);
    for (std::size_t t = 0; t < T; ++t) {
      const Vector y = wo * c.steps[i][t].h + vo * cond.col(static_cast<Index>(t)) + bo.col(0);
      c.out(i, t, 0) = guide(i, t, 0) + y(0);
      c.out(i, t, 1) = guide(i, t, 1) + y(1);
    }
    c.cond[i] = std::move(cond);
  }
  return c;
}

// Returns d loss / d z.
Vector backward_decoder(const ImputerParams& params, const DecoderCache& c, const Tensor3& d_out,
                        nn::ParamSet& grad) {
  const auto& p = params.params();
  const Index L = static_cast<Index>(params.config().latent_dim);
  const Index H = static_cast<Index>(params.config().hidden_dim);
  const auto wo = p.mat(params.out_w);
  auto gwo = grad.mat(params.out_w), gvo = grad.mat(params.skip_w), gbo = grad.mat(params.out_b);
  Vector dz = Vector::Zero(L);
  const std::size_t T = d_out.frames();
  for (std::size_t i = 0; i < d_out.agents(); ++i) {
    Matrix dh(H, static_cast<Index>(T));
    for (std::size_t t = 0; t < T; ++t) {
      const Eigen::Vector2d dy(d_out(i, t, 0), d_out(i, t, 1));
      const auto k = static_cast<Index>(t);
      gwo.noalias() += dy * c.steps[i][t].h.transpose();
      gvo.noalias() += dy * c.cond[i].col(k).transpose();
      gbo.col(0) += dy;
      dh.col(k) = wo.transpose() * dy;
    }
    Matrix dx;
    nn::gru_backward(p, params.dec, c.steps[i], dh, grad, &dx);
    dz += dx.topRows(L).rowwise().sum();
  }
  return dz;
}

void check_finite(double v, const char* term) {
  if (!std::isfinite(v)) throw Error(ErrorCode::NumericalInstability, std::string("non-finite ") + term + " term");
}

constexpr double kDistEps = 1e-12;

// Regularizers over the reconstruction; adds their gradients into d_out.
void regularizers(const LatentConfig& cfg, const ObservedSequence& seq, const Tensor3& xh, LossTerms& terms,
                  Tensor3& d_out) {
  const std::size_t n = xh.agents(), T = xh.frames();

  if (cfg.lambda_smooth > 0.0 && T >= 3) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 1; t + 1 < T; ++t) {
        for (std::size_t k = 0; k < 2; ++k) {
          const double d2 = xh(i, t + 1, k) - 2.0 * xh(i, t, k) + xh(i, t - 1, k);
          s += d2 * d2;
          const double g = 2.0 * cfg.lambda_smooth * d2;
          d_out(i, t + 1, k) += g;
          d_out(i, t, k) -= 2.0 * g;
          d_out(i, t - 1, k) += g;
        }
      }
    }
    terms.smooth = cfg.lambda_smooth * s;
  }

  if (n < 2) return;

  const auto pair_grad = [&](std::size_t t, std::size_t i, std::size_t j, double dist, double coeff) {
    // coeff = d term / d dist
    for (std::size_t k = 0; k < 2; ++k) {
      const double g = coeff * (xh(i, t, k) - xh(j, t, k)) / dist;
      d_out(i, t, k) += g;
      d_out(j, t, k) -= g;
    }
  };

  if (cfg.lambda_form > 0.0) {
    std::vector<std::size_t> full;
    for (std::size_t t = 0; t < T; ++t) {
      bool all = true;
      for (std::size_t i = 0; i < n && all; ++i) all = seq.observed(i, t);
      if (all) full.push_back(t);
    }
    if (!full.empty()) {
      std::map<std::size_t, std::vector<double>> ref_cache;
      double f = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        // Nearest fully observed frame, ties resolved toward the earlier one.
        const auto after = std::lower_bound(full.begin(), full.end(), t);
        std::size_t r = 0;
        if (after == full.end()) {
          r = full.back();
        } else if (*after == t || after == full.begin()) {
          r = *after;
        } else {
          const std::size_t before = *std::prev(after);
          r = (t - before <= *after - t) ? before : *after;
        }
        auto [it, inserted] = ref_cache.try_emplace(r);
        if (inserted) {
          it->second.reserve(n * (n - 1) / 2);
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) it->second.push_back(norm(seq.x_obs.point(i, r) - seq.x_obs.point(j, r)));
          }
        }
        const auto& ref = it->second;
        std::size_t pi = 0;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j, ++pi) {
            const double dx = xh(i, t, 0) - xh(j, t, 0), dy = xh(i, t, 1) - xh(j, t, 1);
            const double dist = std::sqrt(dx * dx + dy * dy + kDistEps);
            const double e = dist - ref[pi];
            f += e * e;
            pair_grad(t, i, j, dist, 2.0 * cfg.lambda_form * e);
          }
        }
      }
      terms.formation = cfg.lambda_form * f;
    }
  }

  if (cfg.lambda_coll > 0.0) {
    double c = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          const double dx = xh(i, t, 0) - xh(j, t, 0), dy = xh(i, t, 1) - xh(j, t, 1);
          const double dist = std::sqrt(dx * dx + dy * dy + kDistEps);
          const double h = cfg.collision_radius - dist;
          if (h <= 0.0) continue;
          c += h * h;
          pair_grad(t, i, j, dist, -2.0 * cfg.lambda_coll * h);
        }
      }
    }
    terms.collision = cfg.lambda_coll * c;
  }
}

}  // namespace

Posterior encode(const ImputerParams& params, const ObservedSequence& seq) {
  check_shapes(params, seq);
  return run_encoder(params, seq).post;
}

Tensor3 decode(const ImputerParams& params, const Vector& z, const ObservedSequence& seq) {
  check_shapes(params, seq);
  return run_decoder(params, z, seq).out;
}

LossAndGrad elbo_loss_with_noise(const ImputerParams& params, const ObservedSequence& seq, const Tensor3& x_true,
                                 const Vector& eps) {
  check_shapes(params, seq);
  const auto& cfg = params.config();
  if (x_true.agents() != seq.agents() || x_true.frames() != seq.frames()) {
    throw Error(ErrorCode::DimensionError, "ground truth shape differs from the observed sequence");
  }
  if (!std::all_of(x_true.data().begin(), x_true.data().end(), [](double v) { return std::isfinite(v); })) {
    throw Error(ErrorCode::InvalidArgument, "ground truth contains non-finite values");
  }
  if (eps.size() != static_cast<Index>(cfg.latent_dim)) throw Error(ErrorCode::DimensionError, "noise size mismatch");

  LossAndGrad res{{}, params.params().zeros_like()};
  const EncoderCache enc = run_encoder(params, seq);
  const Vector sigma = (0.5 * enc.post.log_var.array()).exp().matrix();
  const Vector z = enc.post.mu + sigma.cwiseProduct(eps);
  const DecoderCache dec = run_decoder(params, z, seq);
  const Tensor3& xh = dec.out;

  Tensor3 d_out(seq.agents(), seq.frames());
  double rec = 0.0;
  for (std::size_t i = 0; i < seq.agents(); ++i) {
    for (std::size_t t = 0; t < seq.frames(); ++t) {
      if (seq.observed(i, t)) continue;
      for (std::size_t k = 0; k < 2; ++k) {
        const double e = x_true(i, t, k) - xh(i, t, k);
        rec += e * e;
        d_out(i, t, k) = -2.0 * e;
      }
    }
  }
  res.terms.reconstruction = rec;
  check_finite(rec, "reconstruction");

  const Vector var = (enc.post.log_var.array().exp()).matrix();
  const double kl =
      0.5 * (enc.post.mu.squaredNorm() + var.sum() - static_cast<double>(cfg.latent_dim) - enc.post.log_var.sum());
  res.terms.kl = std::max(0.0, kl);
  check_finite(kl, "KL");

  regularizers(cfg, seq, xh, res.terms, d_out);
  check_finite(res.terms.smooth, "smoothness");
  check_finite(res.terms.formation, "formation");
  check_finite(res.terms.collision, "collision");

  res.terms.total = res.terms.reconstruction + cfg.beta * res.terms.kl + res.terms.smooth + res.terms.formation +
                    res.terms.collision;

  const Vector dz = backward_decoder(params, dec, d_out, res.grad);
  const Vector d_mu = dz + cfg.beta * enc.post.mu;
  const Vector d_logvar = (dz.cwiseProduct(eps).cwiseProduct(0.5 * sigma)) + cfg.beta * 0.5 * (var.array() - 1.0).matrix();
  backward_encoder(params, seq, enc, d_mu, d_logvar, res.grad);
  if (!res.grad.all_finite()) throw Error(ErrorCode::NumericalInstability, "non-finite gradient");
  return res;
}

LossAndGrad elbo_loss(const ImputerParams& params, const ObservedSequence& seq, const Tensor3& x_true,
                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector eps(static_cast<Index>(params.config().latent_dim));
  for (Index k = 0; k < eps.size(); ++k) eps(k) = normal(rng);
  return elbo_loss_with_noise(params, seq, x_true, eps);
}

DistillResult distill_step(const ImputerParams& learner, const ImputerParams& demonstrator,
                           const ObservedSequence& full, const ObservedSequence& masked, double weight) {
  check_shapes(learner, masked);
  check_shapes(demonstrator, full);
  if (full.agents() != masked.agents() || full.frames() != masked.frames()) {
    throw Error(ErrorCode::DimensionError, "full and masked sequences differ in shape");
  }
  const Tensor3 target = decode(demonstrator, encode(demonstrator, full).mu, full);

  DistillResult res{0.0, learner.params().zeros_like()};
  const EncoderCache enc = run_encoder(learner, masked);
  const DecoderCache dec = run_decoder(learner, enc.post.mu, masked);
  Tensor3 d_out(masked.agents(), masked.frames());
  double term = 0.0;
  for (std::size_t k = 0; k < target.data().size(); ++k) {
    const double e = dec.out.data()[k] - target.data()[k];
    term += e * e;
    d_out.data()[k] = 2.0 * weight * e;
  }
  res.term = weight * term;
  check_finite(res.term, "distillation");
  if (weight == 0.0) return res;
  const Vector dz = backward_decoder(learner, dec, d_out, res.grad);
  backward_encoder(learner, masked, enc, dz, Vector::Zero(dz.size()), res.grad);
  return res;
}

CompletedSequence impute(const ImputerParams& params, const ObservedSequence& seq) {
  CompletedSequence out = spline_impute(seq);
  const bool needs_model =
      std::any_of(out.provenance.begin(), out.provenance.end(), [](Provenance p) { return p == Provenance::Unresolved; });
  if (!needs_model) return out;
  const Posterior post = encode(params, seq);
  const Tensor3 xh = decode(params, post.mu, seq);
  const std::size_t T = seq.frames();
  for (std::size_t i = 0; i < seq.agents(); ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      auto& prov = out.provenance[i * T + t];
      if (prov != Provenance::Unresolved) continue;
      const Vec2 p = xh.point(i, t);
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw Error(ErrorCode::NumericalInstability, "decoder produced a non-finite fill");
      }
      out.x_full.set(i, t, clamp_to_bounds(p));
      prov = Provenance::Model;
    }
  }
  return out;
}

}  // namespace pitchlab::imputation
