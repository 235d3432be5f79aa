#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tgnn/errors.hpp"

namespace tgnn {

// Dense double matrix; the library's lingua franca for features, weights and
// gradients. Biases are 1 x d matrices so one state type serves every
// parameter.
using Matrix = Eigen::MatrixXd;

namespace detail {
inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeMismatch(std::string(what) + ": " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
  }
}
}  // namespace detail

// Checked product: throws ShapeMismatch instead of asserting on size errors.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeMismatch("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                        " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  return a * b;
}

// Elementwise max(x, 0). Returns an expression, so it composes without a
// temporary; assign the result before the argument goes out of scope.
template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(typename Derived::Scalar(0));
}

// Gradient of relu at pre-activation `pre`: passes `upstream` where pre > 0.
inline Matrix relu_backward(const Matrix& pre, const Matrix& upstream) {
  detail::require_same_shape(pre, upstream, "relu_backward");
  return ((pre.array() > 0.0).cast<double>() * upstream.array()).matrix();
}

struct SoftmaxCrossEntropy {
  double loss = 0.0;  // mean negative log-likelihood over rows
  Matrix grad;        // d loss / d logits, same shape as logits
};

// Row-wise softmax followed by cross entropy against integer labels, averaged
// over rows. Numerically stabilized by the row-max shift. Throws ShapeMismatch
// when labels.size() != logits.rows() and LabelOutOfRange for labels outside
// [0, logits.cols()).
inline SoftmaxCrossEntropy softmax_cross_entropy(const Matrix& logits,
                                                 std::span<const int> labels) {
  const Eigen::Index rows = logits.rows();
  const Eigen::Index cols = logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    throw ShapeMismatch("softmax_cross_entropy: " + std::to_string(labels.size()) +
                        " labels for " + std::to_string(rows) + " rows");
  }
  SoftmaxCrossEntropy result;
  result.grad.resize(rows, cols);
  double total = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const int label = labels[i];
    if (label < 0 || label >= cols) {
      throw LabelOutOfRange("softmax_cross_entropy: label " + std::to_string(label) +
                            " not in [0, " + std::to_string(cols) + ")");
    }
    const double shift = logits.row(i).maxCoeff();
    const Eigen::ArrayXd shifted = logits.row(i).array() - shift;
    const double log_sum = std::log(shifted.exp().sum());
    total += log_sum - shifted(label);
    result.grad.row(i) = (shifted - log_sum).exp().matrix() / static_cast<double>(rows);
    result.grad(i, label) -= 1.0 / static_cast<double>(rows);
  }
  result.loss = total / static_cast<double>(rows);
  return result;
}

// First and second moment accumulators for one parameter.
struct AdamState {
  Matrix m;
  Matrix v;
  long step = 0;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState(Eigen::Index rows, Eigen::Index cols, double lr_ = 0.01)
      : m(Matrix::Zero(rows, cols)), v(Matrix::Zero(rows, cols)), lr(lr_) {}
};

// One bias-corrected update: param -= lr * m_hat / (sqrt(v_hat) + eps).
inline void adam_step(Matrix& param, const Matrix& grad, AdamState& state) {
  detail::require_same_shape(param, grad, "adam_step: param vs grad");
  detail::require_same_shape(param, state.m, "adam_step: param vs state");
  ++state.step;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = (state.beta2 * state.v.array() + (1.0 - state.beta2) * grad.array().square()).matrix();
  const double m_scale = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double v_scale = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  param.array() -=
      state.lr * (state.m.array() / m_scale) / ((state.v.array() / v_scale).sqrt() + state.eps);
}

// --- deterministic randomness helpers ---------------------------------------
// All shuffling and sampling in the library goes through these so results are
// identical across standard library implementations.

// Uniform double in [0, 1) from the generator's top 53 bits.
inline double uniform_double(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
inline double uniform_double(std::mt19937_64& gen, double lo, double hi) {
  return lo + (hi - lo) * uniform_double(gen);
}

// In-place Fisher-Yates shuffle with explicit index draws.
template <typename T>
void fisher_yates_shuffle(std::vector<T>& values, std::mt19937_64& gen) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(gen() % i);
    std::swap(values[i - 1], values[j]);
  }
}

// Stateless mix of two seeds (splitmix64 finalizer), e.g. run seed + epoch.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace tgnn
