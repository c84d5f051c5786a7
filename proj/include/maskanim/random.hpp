#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace maskanim {

/// Seeded pseudo-random stream. Every stochastic operation takes one of these
/// explicitly; equal seeds give equal sequences.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform real in [lo, hi]; returns lo when lo == hi.
  double uniform(double lo, double hi);
  /// Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);
  bool coin_flip();
  /// Poisson count with the given mean; 0 when mean <= 0.
  int poisson(double mean);

  /// Full engine state, for checkpoints.
  [[nodiscard]] std::string state() const;
  void restore(const std::string& state);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent seed for a named role from a base seed.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t base, std::string_view role);

}  // namespace maskanim
