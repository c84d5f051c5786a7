#pragma once

// Domain value types and the bilinear resampling operators.
//
// Resampling convention (used everywhere in the project): half-pixel centers.
// Output pixel i of an axis resized from `in` to `out` samples the input at
// continuous coordinate (i + 0.5) * in / out - 0.5, clamped to [0, in - 1],
// with linear weights between the two neighbouring pixels. Constants are
// reproduced exactly and outputs never leave the range of their inputs.

#include <string>
#include <vector>

#include "maskanim/tensor.hpp"

namespace maskanim {

/// RGB image, shape (1, 3, R, R), every value in [0, 1].
class Frame {
 public:
  explicit Frame(Tensor data);
  static Frame filled(int resolution, float value);

  [[nodiscard]] const Tensor& tensor() const { return data_; }
  [[nodiscard]] int resolution() const { return data_.h(); }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  Tensor data_;
};

/// Single-channel foreground map, shape (1, 1, R, R), every value in [0, 1].
class Mask {
 public:
  explicit Mask(Tensor data);
  static Mask filled(int resolution, float value);

  [[nodiscard]] const Tensor& tensor() const { return data_; }
  [[nodiscard]] int resolution() const { return data_.h(); }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  Tensor data_;
};

struct VideoClip {
  std::string id;
  std::vector<Frame> frames;
};

/// Throws std::invalid_argument unless the clip has >= 2 frames of one resolution.
void require_source_clip(const VideoClip& clip);

/// Bilinear resize of any NCHW tensor to target x target.
[[nodiscard]] Tensor resample(const Tensor& x, int target_resolution);

/// Operator D. Throws std::invalid_argument for target < 1.
[[nodiscard]] Frame downscale(const Frame& x, int target_resolution);
[[nodiscard]] Mask downscale(const Mask& x, int target_resolution);

/// Operator U. Throws std::invalid_argument when target < source resolution.
[[nodiscard]] Mask upscale(const Mask& x, int target_resolution);

}  // namespace maskanim
