#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "maskanim/perturbation.hpp"
#include "support.hpp"

using namespace maskanim;
using maskanim::testing::random_frame;
using maskanim::testing::random_mask;

namespace {

float sorted_median(const Mask& m) {
  std::vector<float> v(m.tensor().values().begin(), m.tensor().values().end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5f * (v[n / 2 - 1] + v[n / 2]);
}

struct Box {
  int x0 = 1 << 30, y0 = 1 << 30, x1 = -1, y1 = -1;
  [[nodiscard]] int width() const { return x1 - x0 + 1; }
  [[nodiscard]] int height() const { return y1 - y0 + 1; }
};

Box support_box(const Mask& m) {
  Box b;
  const int r = m.resolution();
  for (int y = 0; y < r; ++y)
    for (int x = 0; x < r; ++x)
      if (m.tensor().at(0, 0, y, x) > 0.0f) {
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
  return b;
}

Mask centered_block(int resolution, int size) {
  Tensor t(Shape{1, 1, resolution, resolution}, 0.0f);
  const int lo = (resolution - size) / 2;
  for (int y = lo; y < lo + size; ++y)
    for (int x = lo; x < lo + size; ++x) t.at(0, 0, y, x) = 1.0f;
  return Mask(t);
}

// Textbook HSV -> RGB.
std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = (h - std::floor(h)) * 6.0;
  const int i = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

void check_unit_range(const Mask& m) {
  CHECK(min_value(m.tensor()) >= 0.0f);
  CHECK(max_value(m.tensor()) <= 1.0f);
}

}  // namespace

TEST_CASE("median threshold on a 2x2 example") {
  const Mask m(Tensor(Shape{1, 1, 2, 2}, std::vector<float>{0.1f, 0.2f, 0.6f, 0.8f}));
  CHECK(median_value(m) == doctest::Approx(0.4));
  const Mask out = median_threshold(m);
  CHECK(out.tensor().values()[0] == 0.0f);
  CHECK(out.tensor().values()[1] == 0.0f);
  CHECK(out.tensor().values()[2] == 0.6f);
  CHECK(out.tensor().values()[3] == 0.8f);
}

TEST_CASE("median threshold keeps ties and zero masks") {
  CHECK(median_threshold(Mask::filled(8, 0.0f)) == Mask::filled(8, 0.0f));
  CHECK(median_threshold(Mask::filled(8, 0.35f)) == Mask::filled(8, 0.35f));
}

TEST_CASE("median threshold outputs are zero or at least the median") {
  RandomStream rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const Mask m = random_mask(rng.uniform_int(1, 20), rng);
    const float rho = median_value(m);
    CHECK(rho == sorted_median(m));
    const Mask out = median_threshold(m);
    for (std::size_t i = 0; i < out.tensor().numel(); ++i) {
      const float v = out.tensor().data()[i];
      CHECK((v == 0.0f || v >= rho));
      CHECK((v == 0.0f || v == m.tensor().data()[i]));
    }
  }
}

TEST_CASE("perturb_test shrinks a centered block to 24x24") {
  const Mask out = perturb_test(centered_block(64, 32));
  const Box b = support_box(out);
  CHECK(std::abs(b.width() - 24) <= 1);
  CHECK(std::abs(b.height() - 24) <= 1);
  CHECK(b.x0 >= 19);
  CHECK(b.x1 <= 44);
  CHECK(perturb_test(Mask::filled(64, 0.0f)) == Mask::filled(64, 0.0f));
}

TEST_CASE("perturb_test leaves an empty border ring") {
  RandomStream rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Mask out = perturb_test(random_mask(64, rng));
    check_unit_range(out);
    float ring = 0.0f;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (y < 8 || y >= 56 || x < 8 || x >= 56) ring = std::max(ring, out.tensor().at(0, 0, y, x));
    CHECK(ring == 0.0f);
  }
}

TEST_CASE("unit strip warp is an exact identity") {
  RandomStream rng(3);
  for (auto orientation : {StripOrientation::vertical, StripOrientation::horizontal}) {
    for (int trial = 0; trial < 20; ++trial) {
      const Mask m = random_mask(rng.uniform_int(6, 40), rng);
      const StripWarpParams p{orientation, std::vector<double>(6, 1.0), 1.0};
      CHECK(strip_warp(m, p) == m);
    }
  }
}

TEST_CASE("strip warp only moves content along the strip's cross axis") {
  // Vertical strips rescale horizontally; a full-height column pattern keeps
  // every row identical.
  Tensor t(Shape{1, 1, 24, 24}, 0.0f);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) t.at(0, 0, y, x) = (x % 4 < 2) ? 1.0f : 0.2f;
  const StripWarpParams p{StripOrientation::vertical, {0.8, 1.2, 0.9, 1.1, 0.75, 1.25}, 1.0};
  const Mask out = strip_warp(Mask(t), p);
  for (int y = 1; y < 24; ++y)
    for (int x = 0; x < 24; ++x) CHECK(out.tensor().at(0, 0, y, x) == out.tensor().at(0, 0, 0, x));
}

TEST_CASE("sampled perturbation parameters stay in range") {
  RandomStream rng(4);
  const PerturbationConfig cfg;
  int vertical = 0;
  for (int i = 0; i < 500; ++i) {
    const StripWarpParams p = sample_strip_warp(rng, cfg);
    CHECK(p.strip_scales.size() == 6);
    for (double s : p.strip_scales) CHECK((s >= 0.75 && s <= 1.25));
    CHECK((p.global_scale >= 0.75 && p.global_scale <= 1.25));
    vertical += p.orientation == StripOrientation::vertical ? 1 : 0;
    const JitterParams j = sample_jitter(rng, cfg);
    CHECK((j.brightness >= 0.9 && j.brightness <= 1.1));
    CHECK((j.contrast >= 0.9 && j.contrast <= 1.1));
    CHECK((j.saturation >= 0.9 && j.saturation <= 1.1));
    CHECK((j.hue_shift >= -0.1 && j.hue_shift <= 0.1));
  }
  CHECK(vertical > 200);
  CHECK(vertical < 300);
}

TEST_CASE("Poisson noise on a zero mask has mean 20/255") {
  RandomStream rng(5);
  const Mask out = perturb_train(Mask::filled(64, 0.0f), rng, {}, {false, false, true});
  CHECK(mean_value(out.tensor()) == doctest::Approx(20.0 / 255.0).epsilon(0.005 / (20.0 / 255.0)));
  check_unit_range(out);
}

TEST_CASE("perturb_train with identity settings returns its input") {
  PerturbationConfig cfg;
  cfg.poisson_lambda = 0.0;
  cfg.strip_scale_min = cfg.strip_scale_max = 1.0;
  cfg.global_scale_min = cfg.global_scale_max = 1.0;
  RandomStream rng(6);
  const Mask m = Mask::filled(32, 0.6f);
  CHECK(perturb_train(m, rng, cfg) == m);
}

TEST_CASE("perturb_train is deterministic per seed and stays in range") {
  RandomStream gen(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Mask m = random_mask(32, gen);
    RandomStream a(100 + trial), b(100 + trial);
    const Mask x = perturb_train(m, a);
    CHECK(x == perturb_train(m, b));
    CHECK(x.resolution() == 32);
    check_unit_range(x);
  }
}

TEST_CASE("color jitter examples") {
  RandomStream rng(8);
  const Frame f = random_frame(16, rng);
  CHECK(color_jitter(f, {}) == f);

  const Frame gray = color_jitter(Frame::filled(8, 0.5f), {1.1, 1.0, 1.0, 0.0});
  for (float v : gray.tensor().values()) CHECK(v == doctest::Approx(0.55).epsilon(1e-6));

  Tensor red(Shape{1, 3, 4, 4}, 0.0f);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) red.at(0, 0, y, x) = 1.0f;
  const Frame shifted = color_jitter(Frame(red), {1.0, 1.0, 1.0, 0.1});
  const auto expected = hsv_to_rgb(0.0 + 0.1, 1.0, 1.0);
  for (int c = 0; c < 3; ++c) CHECK(shifted.tensor().at(0, c, 2, 1) == doctest::Approx(expected[c]).epsilon(1e-6));
  CHECK(expected[1] == doctest::Approx(0.6));
}

TEST_CASE("color jitter stays in range and rejects bad parameters") {
  RandomStream rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const Frame out = color_jitter(random_frame(16, rng), sample_jitter(rng));
    CHECK(min_value(out.tensor()) >= 0.0f);
    CHECK(max_value(out.tensor()) <= 1.0f);
  }
  const Frame f = Frame::filled(4, 0.5f);
  CHECK_THROWS_AS((void)color_jitter(f, {1.2, 1.0, 1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS((void)color_jitter(f, {1.0, 0.5, 1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS((void)color_jitter(f, {1.0, 1.0, 1.0, 0.3}), std::invalid_argument);
}
