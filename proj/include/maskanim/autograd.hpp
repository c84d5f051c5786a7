#pragma once

// Minimal reverse-mode automatic differentiation over NCHW tensors.
//
// A Var is a shared handle to a graph node. Ops record their inputs and a
// backward closure only when gradient recording is enabled and at least one
// input requires a gradient; otherwise the result is a constant leaf.
// `backward(loss)` accumulates d(loss)/d(leaf) into every reachable leaf that
// requires a gradient.

#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "maskanim/tensor.hpp"

namespace maskanim::ag {

struct Node;

class Var {
 public:
  Var() = default;

  /// Constant or trainable leaf.
  static Var leaf(Tensor value, bool requires_grad = false);

  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] const Tensor& value() const;
  [[nodiscard]] Tensor& mutable_value();
  [[nodiscard]] const Shape& shape() const { return value().shape(); }
  /// Accumulated gradient; empty when nothing reached this node.
  [[nodiscard]] const Tensor& grad() const;
  [[nodiscard]] bool has_grad() const;
  [[nodiscard]] bool requires_grad() const;
  void zero_grad();

  /// Scalar value. Loss ops carry a double-precision copy, returned here.
  [[nodiscard]] double item() const;

  /// Same value, cut from the graph.
  [[nodiscard]] Var detach() const;

  [[nodiscard]] const std::shared_ptr<Node>& node() const { return node_; }
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

struct Node {
  Tensor value;
  Tensor grad;
  double scalar = 0.0;
  bool has_scalar = false;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
};

[[nodiscard]] bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Back-propagates from a scalar root with d(root) = seed.
void backward(const Var& root, double seed = 1.0);

struct BatchNormBuffers {
  Tensor& running_mean;
  Tensor& running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

[[nodiscard]] Var conv2d(const Var& x, const Var& weight, const Var& bias);
/// Training mode normalizes with batch statistics and updates the running
/// buffers; evaluation mode normalizes with the running buffers.
[[nodiscard]] Var batch_norm(const Var& x, const Var& gamma, const Var& beta,
                             BatchNormBuffers buffers, bool training);
[[nodiscard]] Var relu(const Var& x);
/// Logistic function, saturating at the nearest floats inside (0, 1).
[[nodiscard]] Var sigmoid(const Var& x);
[[nodiscard]] Var avg_pool2(const Var& x);
[[nodiscard]] Var max_pool2(const Var& x);
[[nodiscard]] Var resize(const Var& x, int height, int width);
[[nodiscard]] Var concat_channels(std::span<const Var> parts);
[[nodiscard]] Var add(const Var& a, const Var& b);
/// y[n,c] = x[n,c] * scale[c] + shift[c] with constant coefficients.
[[nodiscard]] Var channel_affine(const Var& x, std::vector<float> scale, std::vector<float> shift);
/// Scalar mean |a - b|.
[[nodiscard]] Var mean_abs_diff(const Var& a, const Var& b);
/// Scalar sum of weight * term over scalar terms.
[[nodiscard]] Var weighted_sum(std::span<const std::pair<double, Var>> terms);

}  // namespace maskanim::ag
