#include <doctest.h>

#include <cmath>
#include <limits>

#include "maskanim/autograd.hpp"
#include "support.hpp"

using namespace maskanim;
using maskanim::testing::finite_difference;
using maskanim::testing::random_tensor;

namespace {

// Checks d(loss)/d(input) for `samples` random elements of every input.
template <class Build>
void gradcheck(std::vector<Tensor> inputs, Build&& build, RandomStream& rng, double tol = 2e-2,
               int samples = 8) {
  std::vector<ag::Var> leaves;
  for (const Tensor& t : inputs) leaves.push_back(ag::Var::leaf(t, true));
  const ag::Var loss = build(leaves);
  ag::backward(loss);

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    REQUIRE(leaves[k].has_grad());
    for (int s = 0; s < samples; ++s) {
      const auto idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(inputs[k].numel()) - 1));
      const double numeric = finite_difference(inputs[k], idx, [&] {
        ag::NoGradGuard guard;
        std::vector<ag::Var> fresh;
        for (const Tensor& t : inputs) fresh.push_back(ag::Var::leaf(t));
        return build(fresh).item();
      });
      const double analytic = leaves[k].grad().data()[idx];
      CAPTURE(k);
      CAPTURE(idx);
      CHECK(analytic == doctest::Approx(numeric).epsilon(tol).scale(1e-2));
    }
  }
}

// Random projection so every output element contributes to a scalar.
ag::Var project(const ag::Var& y, std::uint64_t seed) {
  RandomStream rng(seed);
  const Tensor target = random_tensor(y.shape(), rng, -2.0f, 2.0f);
  return ag::mean_abs_diff(y, ag::Var::leaf(target));
}

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
  RandomStream rng(1);
  for (int k : {3, 7}) {
    gradcheck({random_tensor(Shape{2, 2, 8, 8}, rng, -1, 1), random_tensor(Shape{3, 2, k, k}, rng, -0.3f, 0.3f),
               random_tensor(Shape{1, 3, 1, 1}, rng, -0.1f, 0.1f)},
              [](const std::vector<ag::Var>& v) { return project(ag::conv2d(v[0], v[1], v[2]), 9); }, rng);
  }
}

TEST_CASE("batch norm gradients match finite differences") {
  RandomStream rng(2);
  for (bool training : {true, false}) {
    Tensor rm(Shape{1, 3, 1, 1}, 0.1f), rv(Shape{1, 3, 1, 1}, 0.8f);
    gradcheck({random_tensor(Shape{2, 3, 4, 4}, rng, -1, 1), random_tensor(Shape{1, 3, 1, 1}, rng, 0.5f, 1.5f),
               random_tensor(Shape{1, 3, 1, 1}, rng, -0.5f, 0.5f)},
              [&](const std::vector<ag::Var>& v) {
                Tensor m = rm, var = rv;
                return project(ag::batch_norm(v[0], v[1], v[2], {m, var}, training), 3);
              },
              rng);
  }
}

TEST_CASE("elementwise, pooling and resize gradients match finite differences") {
  RandomStream rng(3);
  const auto x = [&] { return std::vector<Tensor>{random_tensor(Shape{1, 2, 6, 6}, rng, -1, 1)}; };
  gradcheck(x(), [](const std::vector<ag::Var>& v) { return project(ag::sigmoid(v[0]), 1); }, rng);
  gradcheck(x(), [](const std::vector<ag::Var>& v) { return project(ag::relu(v[0]), 2); }, rng);
  gradcheck(x(), [](const std::vector<ag::Var>& v) { return project(ag::avg_pool2(v[0]), 3); }, rng);
  gradcheck(x(), [](const std::vector<ag::Var>& v) { return project(ag::max_pool2(v[0]), 4); }, rng);
  gradcheck(x(), [](const std::vector<ag::Var>& v) { return project(ag::resize(v[0], 9, 4), 5); }, rng);
  gradcheck(x(), [](const std::vector<ag::Var>& v) {
    return project(ag::channel_affine(v[0], {2.0f, -0.5f}, {0.1f, 0.2f}), 6);
  }, rng);
  gradcheck({random_tensor(Shape{1, 2, 4, 4}, rng, -1, 1), random_tensor(Shape{1, 1, 4, 4}, rng, -1, 1)},
            [](const std::vector<ag::Var>& v) {
              const ag::Var parts[] = {v[0], v[1], v[0]};
              return project(ag::concat_channels(parts), 7);
            },
            rng);
  gradcheck({random_tensor(Shape{1, 2, 4, 4}, rng, -1, 1), random_tensor(Shape{1, 2, 4, 4}, rng, -1, 1)},
            [](const std::vector<ag::Var>& v) {
              const std::pair<double, ag::Var> terms[] = {{3.0, project(ag::add(v[0], v[1]), 8)},
                                                          {0.5, ag::mean_abs_diff(v[0], v[1])}};
              return ag::weighted_sum(terms);
            },
            rng);
}

TEST_CASE("mean_abs_diff carries an exact double scalar") {
  const ag::Var a = ag::Var::leaf(Tensor(Shape{1, 1, 1, 4}, std::vector<float>{0.1f, 0.2f, 0.3f, 0.4f}));
  const ag::Var b = ag::Var::leaf(Tensor(Shape{1, 1, 1, 4}, 0.0f));
  double expected = 0.0;
  for (float v : a.value().values()) expected += v;
  CHECK(ag::mean_abs_diff(a, b).item() == expected / 4.0);
}

TEST_CASE("detach and NoGradGuard stop gradients") {
  ag::Var w = ag::Var::leaf(Tensor(Shape{1, 1, 2, 2}, 0.5f), true);
  const ag::Var zero = ag::Var::leaf(Tensor(Shape{1, 1, 2, 2}, 0.0f));
  {
    ag::NoGradGuard guard;
    CHECK_FALSE(ag::grad_enabled());
    CHECK_FALSE(ag::sigmoid(w).requires_grad());
  }
  CHECK(ag::grad_enabled());
  const ag::Var through = ag::mean_abs_diff(ag::sigmoid(w), zero);
  const ag::Var cut = ag::mean_abs_diff(ag::sigmoid(w).detach(), zero);
  CHECK_FALSE(cut.requires_grad());
  ag::backward(through);
  CHECK(w.has_grad());
  w.zero_grad();
  CHECK_FALSE(w.has_grad());
}

TEST_CASE("gradients accumulate across shared subgraphs") {
  const ag::Var x = ag::Var::leaf(Tensor(Shape{1, 1, 1, 1}, 2.0f), true);
  const ag::Var zero = ag::Var::leaf(Tensor(Shape{1, 1, 1, 1}, 0.0f));
  const ag::Var y = ag::add(x, x);
  ag::backward(ag::mean_abs_diff(y, zero));
  CHECK(x.grad().data()[0] == 2.0f);
}

TEST_CASE("relu and sigmoid propagate NaN") {
  const float nan = std::numeric_limits<float>::quiet_NaN();
  const ag::Var x = ag::Var::leaf(Tensor(Shape{1, 1, 1, 2}, std::vector<float>{nan, -1.0f}));
  CHECK(std::isnan(ag::relu(x).value().data()[0]));
  CHECK(ag::relu(x).value().data()[1] == 0.0f);
  CHECK(std::isnan(ag::sigmoid(x).value().data()[0]));
}
