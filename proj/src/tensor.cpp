#include "maskanim/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace maskanim {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape), data_(shape.numel(), fill) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw std::invalid_argument("negative tensor dimension " + shape.str());
  }
}

Tensor::Tensor(Shape shape, std::vector<float> values) : shape_(shape), data_(std::move(values)) {
  if (data_.size() != shape.numel()) {
    throw std::invalid_argument("tensor data size " + std::to_string(data_.size()) +
                                " does not match shape " + shape.str());
  }
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::add_(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw std::invalid_argument("add_: shape mismatch " + shape_.str() + " vs " +
                                other.shape_.str());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

Tensor Tensor::sample(int index) const {
  if (index < 0 || index >= shape_.n) throw std::out_of_range("sample index out of range");
  Shape s = shape_;
  s.n = 1;
  const std::size_t stride = s.numel();
  std::vector<float> v(data_.begin() + static_cast<std::ptrdiff_t>(stride * index),
                       data_.begin() + static_cast<std::ptrdiff_t>(stride * (index + 1)));
  return Tensor(s, std::move(v));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.numel() != data_.size()) {
    throw std::invalid_argument("reshape " + shape_.str() + " -> " + shape.str());
  }
  return Tensor(shape, data_);
}

float min_value(const Tensor& t) {
  if (t.empty()) return std::numeric_limits<float>::quiet_NaN();
  return *std::min_element(t.values().begin(), t.values().end());
}

float max_value(const Tensor& t) {
  if (t.empty()) return std::numeric_limits<float>::quiet_NaN();
  return *std::max_element(t.values().begin(), t.values().end());
}

double mean_value(const Tensor& t) {
  double sum = 0.0;
  for (float v : t.values()) sum += v;
  return t.empty() ? 0.0 : sum / static_cast<double>(t.numel());
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.values().begin(), t.values().end(),
                     [](float v) { return std::isfinite(v); });
}

Tensor stack(std::span<const Tensor> samples) {
  if (samples.empty()) throw std::invalid_argument("stack: no samples");
  Shape s = samples.front().shape();
  if (s.n != 1) throw std::invalid_argument("stack: samples must have n == 1");
  std::vector<float> v;
  v.reserve(s.numel() * samples.size());
  for (const Tensor& t : samples) {
    if (t.shape() != s) throw std::invalid_argument("stack: shape mismatch " + t.shape().str());
    v.insert(v.end(), t.values().begin(), t.values().end());
  }
  s.n = static_cast<int>(samples.size());
  return Tensor(s, std::move(v));
}

std::uint64_t content_hash(const Tensor& t, std::uint64_t seed) {
  std::uint64_t h = seed;
  const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
  const std::size_t count = t.numel() * sizeof(float);
  for (std::size_t i = 0; i < count; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace maskanim
