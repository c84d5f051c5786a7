#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "maskanim/tensor.hpp"

namespace maskanim::kernels::detail {

struct Tap {
  int i0 = 0;
  int i1 = 0;
  float t = 0.0f;  // weight of i1
};

// Half-pixel-center source taps for one axis.
inline std::vector<Tap> bilinear_taps(int in_size, int out_size) {
  std::vector<Tap> taps(static_cast<std::size_t>(out_size));
  const double scale = static_cast<double>(in_size) / out_size;
  for (int i = 0; i < out_size; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    int i0 = std::min(static_cast<int>(std::floor(src)), in_size - 1);
    Tap tap;
    tap.i0 = i0;
    tap.i1 = std::min(i0 + 1, in_size - 1);
    tap.t = tap.i1 == i0 ? 0.0f : static_cast<float>(src - i0);
    taps[static_cast<std::size_t>(i)] = tap;
  }
  return taps;
}

// Interpolates between v0 and v1 without leaving [min(v0,v1), max(v0,v1)].
// Equal endpoints return the endpoint exactly.
inline float lerp_bounded(float v0, float v1, float t) {
  const float v = v0 + t * (v1 - v0);
  return std::clamp(v, std::min(v0, v1), std::max(v0, v1));
}

inline void check_conv_shapes(const Tensor& in, const Tensor& weight, const Tensor& bias) {
  if (weight.h() != weight.w() || weight.h() % 2 == 0) {
    throw std::invalid_argument("conv2d: kernel must be square and odd, got " +
                                weight.shape().str());
  }
  if (in.c() != weight.c()) {
    throw std::invalid_argument("conv2d: input channels " + std::to_string(in.c()) +
                                " != weight in-channels " + std::to_string(weight.c()));
  }
  if (!bias.empty() && bias.numel() != static_cast<std::size_t>(weight.n())) {
    throw std::invalid_argument("conv2d: bias size mismatch");
  }
}

inline void check_even(const Tensor& in, const char* op) {
  if (in.h() % 2 != 0 || in.w() % 2 != 0) {
    throw std::invalid_argument(std::string(op) + ": spatial size must be even, got " +
                                in.shape().str());
  }
}

}  // namespace maskanim::kernels::detail
