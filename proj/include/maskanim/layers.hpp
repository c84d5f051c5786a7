#pragma once

#include <string>
#include <vector>

#include "maskanim/autograd.hpp"
#include "maskanim/random.hpp"

namespace maskanim::nn {

struct NamedParam {
  std::string name;
  ag::Var var;
};

struct NamedBuffer {
  std::string name;
  Tensor* tensor;
};

/// Flat view of a module tree's trainable parameters and state buffers.
struct Registry {
  std::vector<NamedParam> params;
  std::vector<NamedBuffer> buffers;
};

class Conv2d {
 public:
  Conv2d() = default;
  /// PyTorch-style init: weight and bias ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Conv2d(int in_channels, int out_channels, int kernel, RandomStream& rng);

  [[nodiscard]] ag::Var forward(const ag::Var& x) const;
  void collect(const std::string& prefix, Registry& out) const;

  [[nodiscard]] int in_channels() const { return weight_.value().c(); }
  [[nodiscard]] int out_channels() const { return weight_.value().n(); }
  [[nodiscard]] int kernel() const { return weight_.value().h(); }

 private:
  ag::Var weight_;
  ag::Var bias_;
};

class BatchNorm2d {
 public:
  explicit BatchNorm2d(int channels);

  [[nodiscard]] ag::Var forward(const ag::Var& x, bool training);
  void collect(const std::string& prefix, Registry& out);

 private:
  ag::Var gamma_;
  ag::Var beta_;
  Tensor running_mean_;
  Tensor running_var_;
};

}  // namespace maskanim::nn
