#include "pitchlab/nn.hpp"

#include <algorithm>
#include <cmath>

#include "pitchlab/error.hpp"

namespace pitchlab::nn {

std::size_t ParamSet::add(std::string name, Index rows, Index cols) {
  specs_.push_back({std::move(name), rows, cols});
  offsets_.push_back(values_.size());
  values_.resize(values_.size() + static_cast<std::size_t>(rows * cols), 0.0);
  return specs_.size() - 1;
}

std::size_t ParamSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].name == name) return i;
  }
  throw Error(ErrorCode::DimensionError, "no tensor named " + name);
}

ParamSet ParamSet::zeros_like() const {
  ParamSet z = *this;
  std::fill(z.values_.begin(), z.values_.end(), 0.0);
  return z;
}

bool ParamSet::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void ParamSet::init_glorot(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto& s = specs_[i];
    const bool bias = s.name.size() >= 2 && s.name.compare(s.name.size() - 2, 2, ".b") == 0;
    auto m = mat(i);
    if (bias) {
      m.setZero();
      continue;
    }
    const double a = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
    std::uniform_real_distribution<double> u(-a, a);
    for (Index c = 0; c < s.cols; ++c) {
      for (Index r = 0; r < s.rows; ++r) m(r, c) = u(rng);
    }
  }
}

GruLayout GruLayout::add(ParamSet& p, const std::string& prefix, Index input, Index hidden) {
  GruLayout g;
  g.input = input;
  g.hidden = hidden;
  g.wz = p.add(prefix + ".Wz", hidden, input);
  g.wr = p.add(prefix + ".Wr", hidden, input);
  g.wn = p.add(prefix + ".Wn", hidden, input);
  g.uz = p.add(prefix + ".Uz", hidden, hidden);
  g.ur = p.add(prefix + ".Ur", hidden, hidden);
  g.un = p.add(prefix + ".Un", hidden, hidden);
  g.bz = p.add(prefix + ".z.b", hidden, 1);
  g.br = p.add(prefix + ".r.b", hidden, 1);
  g.bn = p.add(prefix + ".n.b", hidden, 1);
  return g;
}

std::vector<GruStep> gru_forward(const ParamSet& p, const GruLayout& g, const Matrix& inputs) {
  if (inputs.rows() != g.input) throw Error(ErrorCode::DimensionError, "GRU input width mismatch");
  const auto wz = p.mat(g.wz), wr = p.mat(g.wr), wn = p.mat(g.wn);
  const auto uz = p.mat(g.uz), ur = p.mat(g.ur), un = p.mat(g.un);
  const auto bz = p.mat(g.bz), br = p.mat(g.br), bn = p.mat(g.bn);

  std::vector<GruStep> steps(static_cast<std::size_t>(inputs.cols()));
  Vector h = Vector::Zero(g.hidden);
  for (Index t = 0; t < inputs.cols(); ++t) {
    auto& s = steps[static_cast<std::size_t>(t)];
    s.x = inputs.col(t);
    s.h_prev = h;
    s.z = (wz * s.x + uz * h + bz.col(0)).unaryExpr([](double v) { return sigmoid(v); });
    s.r = (wr * s.x + ur * h + br.col(0)).unaryExpr([](double v) { return sigmoid(v); });
    const Vector rh = s.r.cwiseProduct(h);
    s.n = (wn * s.x + un * rh + bn.col(0)).array().tanh().matrix();
    s.h = (Vector::Ones(g.hidden) - s.z).cwiseProduct(s.n) + s.z.cwiseProduct(h);
    h = s.h;
  }
  return steps;
}

void gru_backward(const ParamSet& p, const GruLayout& g, const std::vector<GruStep>& steps, const Matrix& dh,
                  ParamSet& grad, Matrix* dx) {
  const auto wz = p.mat(g.wz), wr = p.mat(g.wr), wn = p.mat(g.wn);
  const auto uz = p.mat(g.uz), ur = p.mat(g.ur), un = p.mat(g.un);
  auto gwz = grad.mat(g.wz), gwr = grad.mat(g.wr), gwn = grad.mat(g.wn);
  auto guz = grad.mat(g.uz), gur = grad.mat(g.ur), gun = grad.mat(g.un);
  auto gbz = grad.mat(g.bz), gbr = grad.mat(g.br), gbn = grad.mat(g.bn);

  if (dx) *dx = Matrix::Zero(g.input, static_cast<Index>(steps.size()));
  Vector carry = Vector::Zero(g.hidden);
  for (std::size_t k = steps.size(); k-- > 0;) {
    const auto& s = steps[k];
    const Vector d = dh.col(static_cast<Index>(k)) + carry;

    const Vector dn = d.cwiseProduct(Vector::Ones(g.hidden) - s.z);
    const Vector dzg = d.cwiseProduct(s.h_prev - s.n);
    Vector dprev = d.cwiseProduct(s.z);

    const Vector an = dn.cwiseProduct((Vector::Ones(g.hidden) - s.n.cwiseProduct(s.n)));
    const Vector rh = s.r.cwiseProduct(s.h_prev);
    gwn.noalias() += an * s.x.transpose();
    gun.noalias() += an * rh.transpose();
    gbn.col(0) += an;
    const Vector drh = un.transpose() * an;
    const Vector dr = drh.cwiseProduct(s.h_prev);
    dprev += drh.cwiseProduct(s.r);

    const Vector az = dzg.cwiseProduct(s.z.cwiseProduct(Vector::Ones(g.hidden) - s.z));
    gwz.noalias() += az * s.x.transpose();
    guz.noalias() += az * s.h_prev.transpose();
    gbz.col(0) += az;
    dprev.noalias() += uz.transpose() * az;

    const Vector ar = dr.cwiseProduct(s.r.cwiseProduct(Vector::Ones(g.hidden) - s.r));
    gwr.noalias() += ar * s.x.transpose();
    gur.noalias() += ar * s.h_prev.transpose();
    gbr.col(0) += ar;
    dprev.noalias() += ur.transpose() * ar;

    if (dx) dx->col(static_cast<Index>(k)) = wz.transpose() * az + wr.transpose() * ar + wn.transpose() * an;
    carry = dprev;
  }
}

void Optimizer::step(ParamSet& params, const ParamSet& grad) {
  if (params.size() != grad.size()) throw Error(ErrorCode::DimensionError, "gradient/parameter size mismatch");
  auto& w = params.values();
  const auto& g = grad.values();
  double scale = 1.0;
  if (cfg_.clip_norm > 0.0) {
    double sq = 0.0;
    for (double v : g) sq += v * v;
    const double n = std::sqrt(sq);
    if (n > cfg_.clip_norm) scale = cfg_.clip_norm / n;
  }
  if (cfg_.kind == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg_.learning_rate * scale * g[i];
    return;
  }
  if (m_.size() != w.size()) {
    m_.assign(w.size(), 0.0);
    v_.assign(w.size(), 0.0);
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double gi = scale * g[i];
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * gi;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * gi * gi;
    w[i] -= cfg_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.epsilon);
  }
}

}  // namespace pitchlab::nn
