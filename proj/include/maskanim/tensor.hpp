#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace maskanim {

/// Dense NCHW shape. Scalars and vectors use the trailing axes.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  [[nodiscard]] std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  [[nodiscard]] std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Owning float32 NCHW array. Value semantics; copies are deep.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] int n() const { return shape_.n; }
  [[nodiscard]] int c() const { return shape_.c; }
  [[nodiscard]] int h() const { return shape_.h; }
  [[nodiscard]] int w() const { return shape_.w; }
  [[nodiscard]] std::size_t numel() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] float* data() { return data_.data(); }
  [[nodiscard]] const float* data() const { return data_.data(); }
  [[nodiscard]] std::span<float> values() { return data_; }
  [[nodiscard]] std::span<const float> values() const { return data_; }

  [[nodiscard]] float* plane(int n, int c) {
    return data_.data() + (static_cast<std::size_t>(n) * shape_.c + c) * shape_.plane();
  }
  [[nodiscard]] const float* plane(int n, int c) const {
    return data_.data() + (static_cast<std::size_t>(n) * shape_.c + c) * shape_.plane();
  }

  [[nodiscard]] float& at(int n, int c, int y, int x) {
    return plane(n, c)[static_cast<std::size_t>(y) * shape_.w + x];
  }
  [[nodiscard]] float at(int n, int c, int y, int x) const {
    return plane(n, c)[static_cast<std::size_t>(y) * shape_.w + x];
  }

  void fill(float value);
  /// Element-wise `this += other`; shapes must match.
  void add_(const Tensor& other);
  /// Returns sample `index` as a tensor with n == 1.
  [[nodiscard]] Tensor sample(int index) const;
  /// Same data, new shape of equal element count.
  [[nodiscard]] Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<float> data_;
};

[[nodiscard]] float min_value(const Tensor& t);
[[nodiscard]] float max_value(const Tensor& t);
[[nodiscard]] double mean_value(const Tensor& t);
[[nodiscard]] bool all_finite(const Tensor& t);
/// Stacks n == 1 tensors of equal shape along the batch axis.
[[nodiscard]] Tensor stack(std::span<const Tensor> samples);
/// 64-bit FNV-1a over the raw bytes, used for bitwise comparisons.
[[nodiscard]] std::uint64_t content_hash(const Tensor& t, std::uint64_t seed = 14695981039346656037ULL);

}  // namespace maskanim
