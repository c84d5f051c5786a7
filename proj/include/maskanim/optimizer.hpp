#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "maskanim/archive.hpp"
#include "maskanim/layers.hpp"

namespace maskanim {

/// Adam with per-parameter moment estimates and step counts, keyed by
/// parameter name. Parameters that received no gradient are left untouched,
/// including their moments and step counts.
class Adam {
 public:
  Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Updates every parameter that has a gradient, then clears all gradients.
  /// Returns the number of parameters stepped.
  int step(const std::vector<nn::NamedParam>& params, double learning_rate);

  /// Number of updates applied to a parameter so far (0 if never stepped).
  [[nodiscard]] std::int64_t steps(const std::string& name) const;

  /// Appends moments as `adam.m/<name>` and `adam.v/<name>` tensors and the
  /// step counts under meta["adam"].
  void save(TensorArchive& archive) const;
  void load(const TensorArchive& archive);

 private:
  struct Slot {
    Tensor m;
    Tensor v;
    std::int64_t step = 0;
  };
  double beta1_;
  double beta2_;
  double eps_;
  std::map<std::string, Slot> slots_;
};

}  // namespace maskanim
