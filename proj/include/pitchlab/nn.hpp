#pragma once

// Small dense building blocks shared by the imputer and the behavior-cloning
// policy: a flat named parameter store, a gated recurrent unit with explicit
// backpropagation through time, and first-order optimizers.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pitchlab::nn {

using Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatMap = Eigen::Map<Matrix>;
using ConstMatMap = Eigen::Map<const Matrix>;

struct TensorSpec {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  Index size() const { return rows * cols; }
  friend bool operator==(const TensorSpec&, const TensorSpec&) = default;
};

/// Named column-major tensors packed into one contiguous vector so optimizers
/// and finite-difference checks can treat the model as a flat parameter vector.
class ParamSet {
 public:
  ParamSet() = default;

  /// Returns the tensor index.
  std::size_t add(std::string name, Index rows, Index cols);

  std::size_t num_tensors() const noexcept { return specs_.size(); }
  const std::vector<TensorSpec>& specs() const noexcept { return specs_; }
  std::size_t index_of(const std::string& name) const;

  MatMap mat(std::size_t i) { return {values_.data() + offsets_[i], specs_[i].rows, specs_[i].cols}; }
  ConstMatMap mat(std::size_t i) const { return {values_.data() + offsets_[i], specs_[i].rows, specs_[i].cols}; }

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

  /// Same layout, all zeros.
  ParamSet zeros_like() const;
  bool same_layout(const ParamSet& o) const noexcept { return specs_ == o.specs_; }
  bool all_finite() const noexcept;

  /// Uniform(-a, a) with a = sqrt(6 / (rows + cols)) for matrices; tensors
  /// whose name ends in ".b" stay zero.
  void init_glorot(std::uint64_t seed);

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    return a.specs_ == b.specs_ && a.values_ == b.values_;
  }

 private:
  std::vector<TensorSpec> specs_;
  std::vector<std::size_t> offsets_;
  std::vector<double> values_;
};

/// Tensor indices of one gated recurrent cell inside a ParamSet:
///   z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br)
///   n = tanh(Wn x + Un (r*h) + bn), h' = (1 - z) * n + z * h
struct GruLayout {
  std::size_t wz, wr, wn, uz, ur, un, bz, br, bn;
  Index input = 0;
  Index hidden = 0;

  static GruLayout add(ParamSet& p, const std::string& prefix, Index input, Index hidden);
};

struct GruStep {
  Vector x, h_prev, z, r, n, h;
};

/// Runs the cell over `inputs` (one column per step) from a zero state.
std::vector<GruStep> gru_forward(const ParamSet& p, const GruLayout& g, const Matrix& inputs);

/// Backpropagates `dh` (gradient of the loss w.r.t. each step's output state)
/// through the sequence. Accumulates parameter gradients into `grad` and, when
/// `dx` is non-null, writes input gradients (one column per step).
void gru_backward(const ParamSet& p, const GruLayout& g, const std::vector<GruStep>& steps, const Matrix& dh,
                  ParamSet& grad, Matrix* dx);

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.0;  // 0 disables global-norm clipping
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}
  void step(ParamSet& params, const ParamSet& grad);

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace pitchlab::nn
