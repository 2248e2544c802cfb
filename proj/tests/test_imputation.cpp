#include <doctest.h>

#include <cmath>
#include <random>

#include "pitchlab/error.hpp"
#include "pitchlab/imputation.hpp"
#include "support.hpp"

using namespace pitchlab;
using namespace pitchlab::imputation;

namespace {

// Scalar-loop GRU and heads, written against the documented equations only.
struct OracleGru {
  const nn::ParamSet& p;
  const nn::GruLayout& g;

  std::vector<double> step(const std::vector<double>& x, const std::vector<double>& h) const {
    const auto H = static_cast<std::size_t>(g.hidden);
    const auto lin = [&](std::size_t w, std::size_t u, std::size_t b, const std::vector<double>& hv, std::size_t r) {
      double s = p.mat(b)(static_cast<nn::Index>(r), 0);
      for (std::size_t c = 0; c < x.size(); ++c) s += p.mat(w)(static_cast<nn::Index>(r), static_cast<nn::Index>(c)) * x[c];
      for (std::size_t c = 0; c < H; ++c) s += p.mat(u)(static_cast<nn::Index>(r), static_cast<nn::Index>(c)) * hv[c];
      return s;
    };
    std::vector<double> z(H), r(H), rh(H), out(H);
    for (std::size_t k = 0; k < H; ++k) {
      z[k] = 1.0 / (1.0 + std::exp(-lin(g.wz, g.uz, g.bz, h, k)));
      r[k] = 1.0 / (1.0 + std::exp(-lin(g.wr, g.ur, g.br, h, k)));
      rh[k] = r[k] * h[k];
    }
    for (std::size_t k = 0; k < H; ++k) {
      const double n = std::tanh(lin(g.wn, g.un, g.bn, rh, k));
      out[k] = (1.0 - z[k]) * n + z[k] * h[k];
    }
    return out;
  }
};

Posterior oracle_encode(const ImputerParams& m, const ObservedSequence& s) {
  const auto& p = m.params();
  const std::size_t H = m.config().hidden_dim, L = m.config().latent_dim, T = s.frames();
  std::vector<double> pooled(2 * H, 0.0);
  for (std::size_t i = 0; i < s.agents(); ++i) {
    std::vector<double> hf(H, 0.0), hb(H, 0.0);
    for (std::size_t k = 0; k < T; ++k) {
      const auto in = [&](std::size_t t) {
        const double o = s.observed(i, t) ? 1.0 : 0.0;
        return std::vector<double>{o * s.x_obs(i, t, 0), o * s.x_obs(i, t, 1), o};
      };
      hf = OracleGru{p, m.enc_fwd}.step(in(k), hf);
      hb = OracleGru{p, m.enc_bwd}.step(in(T - 1 - k), hb);
    }
    for (std::size_t k = 0; k < H; ++k) {
      pooled[k] += hf[k] / static_cast<double>(s.agents());
      pooled[H + k] += hb[k] / static_cast<double>(s.agents());
    }
  }
  Posterior post{nn::Vector(static_cast<nn::Index>(L)), nn::Vector(static_cast<nn::Index>(L))};
  for (std::size_t r = 0; r < L; ++r) {
    const auto R = static_cast<nn::Index>(r);
    double mu = p.mat(m.mu_b)(R, 0), lv = p.mat(m.lv_b)(R, 0);
    for (std::size_t c = 0; c < 2 * H; ++c) {
      mu += p.mat(m.mu_w)(R, static_cast<nn::Index>(c)) * pooled[c];
      lv += p.mat(m.lv_w)(R, static_cast<nn::Index>(c)) * pooled[c];
    }
    post.mu(R) = mu;
    post.log_var(R) = lv;
  }
  return post;
}

Tensor3 oracle_decode(const ImputerParams& m, const nn::Vector& z, const ObservedSequence& s) {
  const auto& p = m.params();
  const std::size_t H = m.config().hidden_dim, T = s.frames();
  const Tensor3 guide = guide_fill(s);
  Tensor3 out(s.agents(), T);
  for (std::size_t i = 0; i < s.agents(); ++i) {
    std::vector<double> h(H, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      const double o = s.observed(i, t) ? 1.0 : 0.0;
      std::vector<double> cond{o * s.x_obs(i, t, 0), o * s.x_obs(i, t, 1), o, guide(i, t, 0), guide(i, t, 1)};
      std::vector<double> x(z.data(), z.data() + z.size());
      x.insert(x.end(), cond.begin(), cond.end());
      h = OracleGru{p, m.dec}.step(x, h);
      for (std::size_t k = 0; k < 2; ++k) {
        const auto K = static_cast<nn::Index>(k);
        double y = p.mat(m.out_b)(K, 0);
        for (std::size_t c = 0; c < H; ++c) y += p.mat(m.out_w)(K, static_cast<nn::Index>(c)) * h[c];
        for (std::size_t c = 0; c < cond.size(); ++c) y += p.mat(m.skip_w)(K, static_cast<nn::Index>(c)) * cond[c];
        out(i, t, k) = guide(i, t, k) + y;
      }
    }
  }
  return out;
}

Tensor3 random_tensor(std::size_t n, std::size_t T, std::mt19937_64& rng) {
  Tensor3 x(n, T);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < T; ++t) x.set(i, t, {test::uniform(rng, -0.9, 0.9), test::uniform(rng, -0.4, 0.4)});
  }
  return x;
}

// Random mask that keeps frame 0 fully observed and at least two frames per agent.
std::vector<std::uint8_t> random_mask(std::size_t n, std::size_t T, std::mt19937_64& rng) {
  std::vector<std::uint8_t> m(n * T, 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 1; t + 1 < T; ++t) m[i * T + t] = test::uniform(rng, 0, 1) < 0.4 ? 0 : 1;
  }
  return m;
}

ImputerParams random_params(std::size_t latent, std::size_t hidden, std::uint64_t seed, bool full_head = true) {
  LatentConfig cfg;
  cfg.latent_dim = latent;
  cfg.hidden_dim = hidden;
  cfg.beta = 0.7;
  cfg.lambda_smooth = 0.3;
  cfg.lambda_form = 0.2;
  cfg.lambda_coll = 0.5;
  cfg.collision_radius = 0.3;
  ImputerParams m(cfg);
  m.init_random(seed);
  if (full_head) {
    // Perturb every tensor so the gradient check exercises all paths.
    std::mt19937_64 rng(seed + 1);
    for (auto& v : m.params().values()) v += test::uniform(rng, -0.3, 0.3);
  }
  return m;
}

}  // namespace

TEST_CASE("encoder and decoder match the scalar oracle") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 3, T = 7;
    const auto m = random_params(3, 4, seed);
    const auto seq = ObservedSequence::make(random_tensor(n, T, rng), random_mask(n, T, rng), 25.0);
    const Posterior a = encode(m, seq), b = oracle_encode(m, seq);
    CHECK((a.mu - b.mu).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((a.log_var - b.log_var).cwiseAbs().maxCoeff() < 1e-10);
    nn::Vector z(3);
    for (int k = 0; k < 3; ++k) z(k) = test::uniform(rng, -1, 1);
    const Tensor3 x = decode(m, z, seq), y = oracle_decode(m, z, seq);
    for (std::size_t k = 0; k < x.data().size(); ++k) CHECK(std::abs(x.data()[k] - y.data()[k]) < 1e-10);
  }
}

TEST_CASE("zero weights") {
  std::mt19937_64 rng(3);
  LatentConfig cfg;
  cfg.latent_dim = 2;
  cfg.hidden_dim = 3;
  ImputerParams m(cfg);
  const Tensor3 zeros(4, 6);
  const auto seq0 = ObservedSequence::fully_observed(zeros, 25.0);
  const Posterior post = encode(m, seq0);
  CHECK(post.mu.isZero(0.0));
  CHECK(post.log_var.isZero(0.0));
  CHECK(decode(m, nn::Vector::Zero(2), seq0) == zeros);

  // With a zero head the decoder reproduces the guide.
  const auto seq = ObservedSequence::make(random_tensor(4, 9, rng), random_mask(4, 9, rng), 25.0);
  CHECK(decode(m, nn::Vector::Zero(2), seq) == guide_fill(seq));
  m.init_random(9);
  CHECK(decode(m, nn::Vector::Ones(2), seq) == guide_fill(seq));
  CHECK_THROWS_AS(decode(m, nn::Vector::Zero(3), seq), Error);
}

TEST_CASE("encode and decode are deterministic") {
  std::mt19937_64 rng(5);
  const auto m = random_params(4, 6, 2);
  const auto seq = ObservedSequence::make(random_tensor(5, 12, rng), random_mask(5, 12, rng), 25.0);
  const auto a = encode(m, seq), b = encode(m, seq);
  CHECK(a.mu == b.mu);
  CHECK(a.log_var == b.log_var);
  CHECK(decode(m, a.mu, seq) == decode(m, a.mu, seq));
}

TEST_CASE("ELBO gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const std::size_t n = 3, T = 6;
    const auto m = random_params(2, 3, seed);
    const Tensor3 truth = random_tensor(n, T, rng);
    const auto seq = ObservedSequence::make(truth, random_mask(n, T, rng), 25.0);
    nn::Vector eps(2);
    eps << test::uniform(rng, -1, 1), test::uniform(rng, -1, 1);
    const auto lg = elbo_loss_with_noise(m, seq, truth, eps);
    CHECK(lg.terms.collision > 0.0);
    CHECK(lg.terms.formation > 0.0);
    ImputerParams probe = m;
    const auto loss = [&](const nn::ParamSet& p) {
      probe.params() = p;
      return elbo_loss_with_noise(probe, seq, truth, eps).terms.total;
    };
    CHECK(test::max_grad_error(m.params(), lg.grad, loss, 150, seed) < 1e-4);
  }
}

TEST_CASE("ELBO special cases") {
  std::mt19937_64 rng(6);
  LatentConfig cfg;
  cfg.latent_dim = 2;
  cfg.hidden_dim = 3;
  cfg.lambda_smooth = cfg.lambda_form = cfg.lambda_coll = 0.0;
  cfg.beta = 3.0;
  ImputerParams m(cfg);
  m.init_random(1);
  // Zero encoder heads give the prior exactly.
  m.params().mat(m.mu_w).setZero();
  m.params().mat(m.lv_w).setZero();
  const Tensor3 truth = random_tensor(3, 8, rng);
  const auto full = ObservedSequence::fully_observed(truth, 25.0);
  const auto lg = elbo_loss(m, full, truth, 4);
  CHECK(lg.terms.kl == 0.0);
  CHECK(lg.terms.reconstruction == 0.0);
  CHECK(lg.terms.total == 0.0);

  // A gap on a straight line is recovered by the guide, so the loss stays 0.
  const Segment lin = test::linear_segment(8, 2, 0.01);
  Tensor3 x = segment_tensor(lin);
  std::vector<std::uint8_t> mask(kNumAgents * 8, 1);
  for (std::size_t i = 0; i < kNumAgents; ++i) mask[i * 8 + 3] = 0;
  const auto gap = ObservedSequence::make(x, mask, 25.0);
  CHECK(elbo_loss(m, gap, x, 2).terms.total < 1e-20);

  CHECK_THROWS_AS(elbo_loss(m, full, Tensor3(3, 7), 0), Error);
  Tensor3 bad = truth;
  bad(0, 0, 0) = std::nan("");
  CHECK_THROWS_AS(elbo_loss(m, full, bad, 0), Error);
}

TEST_CASE("KL term is non-negative") {
  std::mt19937_64 rng(8);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto m = random_params(3, 3, seed);
    for (auto& v : m.params().values()) v *= test::uniform(rng, 0.0, 4.0);
    const Tensor3 truth = random_tensor(2, 5, rng);
    const auto seq = ObservedSequence::make(truth, random_mask(2, 5, rng), 25.0);
    CHECK(elbo_loss(m, seq, truth, seed).terms.kl >= -1e-12);
  }
}

TEST_CASE("distillation") {
  std::mt19937_64 rng(9);
  const Tensor3 truth = random_tensor(3, 6, rng);
  const auto full = ObservedSequence::fully_observed(truth, 25.0);
  const auto masked = ObservedSequence::make(truth, random_mask(3, 6, rng), 25.0);
  const auto m = random_params(2, 3, 4);
  CHECK(distill_step(m, m, full, full, 1.0).term == 0.0);
  const auto zero_w = distill_step(m, random_params(2, 3, 5), full, masked, 0.0);
  CHECK(std::all_of(zero_w.grad.values().begin(), zero_w.grad.values().end(), [](double v) { return v == 0.0; }));

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto learner = random_params(2, 3, 20 + seed), demo = random_params(2, 3, 40 + seed);
    const auto r = distill_step(learner, demo, full, masked, 0.8);
    CHECK(r.term > 0.0);
    ImputerParams probe = learner;
    const auto loss = [&](const nn::ParamSet& p) {
      probe.params() = p;
      return distill_step(probe, demo, full, masked, 0.8).term;
    };
    CHECK(test::max_grad_error(learner.params(), r.grad, loss, 100, seed) < 1e-4);
  }
}

TEST_CASE("spline fills") {
  SUBCASE("fully observed is the identity") {
    std::mt19937_64 rng(1);
    const auto seq = ObservedSequence::fully_observed(random_tensor(4, 10, rng), 25.0);
    const auto out = spline_impute(seq);
    CHECK(out.x_full == seq.x_obs);
    for (auto p : out.provenance) CHECK(p == Provenance::Observed);
  }
  SUBCASE("linear motion is exact and C1 at the knots") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Segment lin = test::linear_segment(30, seed, 0.01);
      const Tensor3 x = segment_tensor(lin);
      std::vector<std::uint8_t> mask(kNumAgents * 30, 1);
      for (std::size_t i = 0; i < kNumAgents; ++i) {
        const std::size_t a = 3 + (seed + i) % 20, len = 1 + (seed + 2 * i) % 4;
        for (std::size_t t = a; t < a + len; ++t) mask[i * 30 + t] = 0;
      }
      const auto seq = ObservedSequence::make(x, mask, 25.0);
      const auto out = spline_impute(seq);
      for (std::size_t i = 0; i < kNumAgents; ++i) {
        for (std::size_t t = 0; t < 30; ++t) {
          CHECK(norm(out.x_full.point(i, t) - x.point(i, t)) <= 1e-9);
          CHECK(out.at(i, t) == (seq.observed(i, t) ? Provenance::Observed : Provenance::Spline));
        }
      }
    }
  }
  SUBCASE("Hermite derivative meets the knot velocities") {
    std::mt19937_64 rng(2);
    for (int k = 0; k < 100; ++k) {
      const Vec2 p0{test::uniform(rng, -1, 1), 0.1}, p1{0.3, test::uniform(rng, -1, 1)};
      const Vec2 m0{test::uniform(rng, -1, 1), test::uniform(rng, -1, 1)}, m1{test::uniform(rng, -1, 1), 0.2};
      CHECK(norm(detail::hermite(p0, m0, p1, m1, 0.0) - p0) <= 1e-12);
      CHECK(norm(detail::hermite(p0, m0, p1, m1, 1.0) - p1) <= 1e-12);
      CHECK(norm(detail::hermite_derivative(p0, m0, p1, m1, 0.0) - m0) <= 1e-9);
      CHECK(norm(detail::hermite_derivative(p0, m0, p1, m1, 1.0) - m1) <= 1e-9);
      const double s = test::uniform(rng, 0.1, 0.9), h = 1e-6;
      const Vec2 fd = (1.0 / (2 * h)) * (detail::hermite(p0, m0, p1, m1, s + h) - detail::hermite(p0, m0, p1, m1, s - h));
      CHECK(norm(fd - detail::hermite_derivative(p0, m0, p1, m1, s)) <= 1e-7);
    }
  }
  SUBCASE("quadratic motion stays within 2% of the gap span") {
    // x(t) = (t/30)^2 sampled per frame, frames 10..13 missing.
    Tensor3 x(1, 30);
    for (std::size_t t = 0; t < 30; ++t) x.set(0, t, {std::pow(t / 30.0, 2), 0.0});
    std::vector<std::uint8_t> mask(30, 1);
    for (std::size_t t = 10; t < 14; ++t) mask[t] = 0;
    const auto out = spline_impute(ObservedSequence::make(x, mask, 25.0));
    const double span = x(0, 14, 0) - x(0, 9, 0);
    for (std::size_t t = 10; t < 14; ++t) CHECK(std::abs(out.x_full(0, t, 0) - x(0, t, 0)) < 0.02 * span);
  }
  SUBCASE("too few observations name the agent") {
    Tensor3 x(2, 5);
    std::vector<std::uint8_t> mask{1, 1, 1, 1, 1, 0, 0, 1, 0, 0};
    try {
      spline_impute(ObservedSequence::make(x, mask, 25.0));
      FAIL("expected InsufficientObservations");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InsufficientObservations);
      CHECK(std::string(e.what()).find("agent 1") != std::string::npos);
    }
  }
}

TEST_CASE("impute routing") {
  const auto m = random_params(2, 4, 7, false);
  const Segment s = test::curved_team_segment(40, 3);
  const Tensor3 x = segment_tensor(s);
  std::vector<std::uint8_t> mask(kNumAgents * 40, 1);
  SUBCASE("fully observed") {
    const auto seq = ObservedSequence::make(x, mask, 25.0);
    const auto out = impute(m, seq);
    CHECK(out.x_full == x);
  }
  SUBCASE("short gaps match spline_impute") {
    for (std::size_t i = 0; i < kNumAgents; ++i) {
      for (std::size_t t = 5; t < 8; ++t) mask[i * 40 + t] = 0;
    }
    const auto seq = ObservedSequence::make(x, mask, 25.0);
    const auto a = impute(m, seq), b = spline_impute(seq);
    CHECK(a.x_full == b.x_full);
    CHECK(a.provenance == b.provenance);
  }
  SUBCASE("gaps of five or more go to the model") {
    for (std::size_t i = 0; i < kNumAgents; ++i) {
      const std::size_t len = 1 + i % 10;
      for (std::size_t t = 10; t < 10 + len; ++t) mask[i * 40 + t] = 0;
    }
    const auto seq = ObservedSequence::make(x, mask, 25.0);
    const auto out = impute(m, seq);
    for (std::size_t i = 0; i < kNumAgents; ++i) {
      const std::size_t len = 1 + i % 10;
      for (std::size_t t = 0; t < 40; ++t) {
        const bool gap = t >= 10 && t < 10 + len;
        const Provenance want = !gap ? Provenance::Observed : len <= 4 ? Provenance::Spline : Provenance::Model;
        CHECK(out.at(i, t) == want);
        if (!gap) {
          CHECK(out.x_full(i, t, 0) == x(i, t, 0));
          CHECK(out.x_full(i, t, 1) == x(i, t, 1));
        }
      }
    }
  }
}

TEST_CASE("random gap masks keep the ends observed") {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 50; ++k) {
    const auto mask = random_gap_mask(5, 60, 0.3, 2, 10, rng);
    std::size_t hidden = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(mask[i * 60] == 1);
      CHECK(mask[i * 60 + 59] == 1);
      for (std::size_t t = 0; t < 60; ++t) hidden += mask[i * 60 + t] == 0;
    }
    CHECK(hidden > 0);
  }
}

TEST_CASE("training") {
  std::vector<Segment> data;
  for (std::uint64_t k = 0; k < 4; ++k) data.push_back(test::curved_team_segment(30, k));
  LatentConfig cfg;
  cfg.latent_dim = 2;
  cfg.hidden_dim = 4;
  TrainConfig tc;
  tc.epochs = 2;
  tc.max_agents = 4;
  tc.max_gap = 8;
  tc.seed = 3;
  tc.optimizer = {nn::OptimizerKind::Adam, 1e-3};

  SUBCASE("deterministic per seed") {
    const auto a = train_imputer(data, cfg, tc), b = train_imputer(data, cfg, tc);
    CHECK(a.params == b.params);
    CHECK(a.final_loss <= a.initial_loss);
  }
  SUBCASE("zero learning rate leaves the initialization") {
    tc.optimizer = {nn::OptimizerKind::Sgd, 0.0};
    const auto r = train_imputer(data, cfg, tc);
    ImputerParams init(cfg);
    init.init_random(tc.seed);
    CHECK(r.params == init);
  }
  SUBCASE("empty dataset") {
    CHECK_THROWS_AS(train_imputer(std::vector<Segment>{}, cfg, tc), Error);
  }
}
