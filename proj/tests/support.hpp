#pragma once

// Shared helpers for the unit and acceptance tests: seeded generators for
// random inputs and small fixtures.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "maskanim/config.hpp"
#include "maskanim/core.hpp"
#include "maskanim/random.hpp"
#include "maskanim/tensor.hpp"

namespace maskanim::testing {

inline Tensor random_tensor(Shape shape, RandomStream& rng, float lo = 0.0f, float hi = 1.0f) {
  Tensor t(shape);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

inline Frame random_frame(int resolution, RandomStream& rng) {
  return Frame(random_tensor(Shape{1, 3, resolution, resolution}, rng));
}

/// Mixes smooth blobs, hard blocks and uniform noise so masks exercise ties,
/// zeros and interior values.
inline Mask random_mask(int resolution, RandomStream& rng) {
  Tensor t(Shape{1, 1, resolution, resolution});
  const int kind = rng.uniform_int(0, 2);
  const double cx = rng.uniform(0.2, 0.8) * resolution;
  const double cy = rng.uniform(0.2, 0.8) * resolution;
  const double r = rng.uniform(0.1, 0.4) * resolution;
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      float v = 0.0f;
      if (kind == 0) {
        v = static_cast<float>(std::exp(-(dx * dx + dy * dy) / (r * r)));
      } else if (kind == 1) {
        v = (std::fabs(dx) < r && std::fabs(dy) < r) ? 1.0f : 0.0f;
      } else {
        v = static_cast<float>(rng.uniform(0.0, 1.0));
      }
      t.at(0, 0, y, x) = v;
    }
  }
  return Mask(std::move(t));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("maskanim_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Toy configuration shrunk further for fast unit tests.
inline PipelineConfig tiny_config() {
  PipelineConfig c = PipelineConfig::toy();
  c.frame_resolution = 32;
  c.mask_resolution = 8;
  c.base_channels = 4;
  c.max_channels = 16;
  c.encoder_depth = 2;
  c.batch_size = 2;
  c.ssim_window = 7;
  return c;
}

}  // namespace maskanim::testing

namespace maskanim::testing {

/// Central finite difference of scalar `f` with respect to element `index`
/// of `x`, evaluated in double around the float value.
template <class F>
double finite_difference(Tensor& x, std::size_t index, F&& f, double h = 1e-3) {
  const float saved = x.data()[index];
  x.data()[index] = static_cast<float>(saved + h);
  const double up = f();
  x.data()[index] = static_cast<float>(saved - h);
  const double down = f();
  x.data()[index] = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace maskanim::testing
