#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "maskanim/errors.hpp"
#include "maskanim/networks.hpp"
#include "support.hpp"

using namespace maskanim;
using maskanim::testing::finite_difference;
using maskanim::testing::random_frame;
using maskanim::testing::random_mask;
using maskanim::testing::random_tensor;
using maskanim::testing::tiny_config;

namespace {

void check_open_unit(const Tensor& t) {
  CHECK(all_finite(t));
  CHECK(min_value(t) > 0.0f);
  CHECK(max_value(t) < 1.0f);
}

}  // namespace

TEST_CASE("full-scale layouts have the stated block counts") {
  RandomStream rng(0);
  NetworkSpec spec;
  const EncoderDecoder m(spec, rng);
  CHECK(m.encode_block_count() == 5);
  CHECK(m.decode_block_count() == 5);
  const LowResGenerator l(5, 64, 512, 64, rng);
  CHECK(l.residual_block_count() == 6);
  CHECK(l.decode_block_count() == 2);
}

TEST_CASE("network specs are validated") {
  RandomStream rng(0);
  NetworkSpec spec;
  spec.depth = 0;
  CHECK_THROWS_AS(EncoderDecoder(spec, rng), ConfigError);
  spec = NetworkSpec{};
  spec.resolution = 24;
  CHECK_THROWS_AS(EncoderDecoder(spec, rng), ConfigError);
}

TEST_CASE("toy bundle forwards produce the contracted shapes") {
  PipelineConfig config = PipelineConfig::toy();
  config.encoder_depth = 3;
  ModelBundle models(config);
  RandomStream rng(1);
  const Frame s = random_frame(64, rng);
  const Frame s_small = downscale(s, 16);

  const Mask m_s = models.mask(s);
  CHECK(m_s.tensor().shape() == Shape{1, 1, 16, 16});
  check_open_unit(m_s.tensor());
  const Mask m_d = models.refine(s_small, m_s, random_mask(16, rng));
  CHECK(m_d.tensor().shape() == Shape{1, 1, 16, 16});
  check_open_unit(m_d.tensor());
  const Frame c = models.coarse(s_small, m_s, m_d);
  CHECK(c.tensor().shape() == Shape{1, 3, 64, 64});
  check_open_unit(c.tensor());
  const Frame f = models.fine(s, upscale(m_s, 64), upscale(m_d, 64), c);
  CHECK(f.tensor().shape() == Shape{1, 3, 64, 64});
  check_open_unit(f.tensor());
}

TEST_CASE("evaluation forwards are deterministic and total") {
  const PipelineConfig config = tiny_config();
  ModelBundle a(config);
  ModelBundle b(config);
  RandomStream rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const Frame s = random_frame(32, rng);
    const Mask p = random_mask(8, rng);
    const Mask m1 = a.mask(s);
    CHECK(m1 == a.mask(s));
    CHECK(m1 == b.mask(s));
    const Frame small = downscale(s, 8);
    CHECK(a.refine(small, m1, p) == b.refine(small, m1, p));
    const Frame c = a.coarse(small, m1, p);
    CHECK(c == a.coarse(small, m1, p));
    CHECK(a.fine(s, upscale(m1, 32), upscale(p, 32), c) == b.fine(s, upscale(m1, 32), upscale(p, 32), c));
  }
  // Degenerate inputs stay finite and in range.
  const Frame gray = Frame::filled(8, 0.5f);
  const Mask zero = Mask::filled(8, 0.0f);
  check_open_unit(a.coarse(gray, zero, zero).tensor());
}

TEST_CASE("refinement input order is part of the contract") {
  // Batch statistics keep the untrained decoder's ReLUs alive; with fresh
  // running averages a 4-channel R can collapse to a constant output.
  ModelBundle models(tiny_config());
  RandomStream rng(3);
  const auto small = ag::Var::leaf(random_tensor(Shape{2, 3, 8, 8}, rng));
  const auto m_s = ag::Var::leaf(random_tensor(Shape{2, 1, 8, 8}, rng));
  const auto p = ag::Var::leaf(random_tensor(Shape{2, 1, 8, 8}, rng));
  ag::NoGradGuard guard;
  const Tensor forward = refine_forward(models, small, m_s, p, true).value();
  const Tensor swapped = refine_forward(models, small, p, m_s, true).value();
  CHECK(content_hash(forward) != content_hash(swapped));
}

TEST_CASE("mismatched resolutions are rejected") {
  ModelBundle models(tiny_config());
  const auto frame = ag::Var::leaf(Tensor(Shape{1, 3, 16, 16}, 0.5f));
  CHECK_THROWS_AS((void)mask_forward(models, frame, false), std::invalid_argument);
  const auto small = ag::Var::leaf(Tensor(Shape{1, 3, 8, 8}, 0.5f));
  const auto mask = ag::Var::leaf(Tensor(Shape{1, 1, 4, 4}, 0.5f));
  CHECK_THROWS_AS((void)refine_forward(models, small, mask, mask, false), std::invalid_argument);
  CHECK_THROWS_AS((void)lowres_forward(models, small, mask, mask, false), std::invalid_argument);
}

TEST_CASE("H keeps its output shape with a zeroed bottleneck") {
  PipelineConfig config = tiny_config();
  ModelBundle models(config);
  RandomStream rng(4);
  const auto x = ag::Var::leaf(random_tensor(Shape{2, 8, 32, 32}, rng));
  ag::NoGradGuard guard;
  const ag::Var y = models.highres_generator.forward(x, false, true);
  CHECK(y.shape() == Shape{2, 3, 32, 32});
  CHECK(all_finite(y.value()));
}

TEST_CASE("parameter counts grow with base_channels") {
  std::size_t previous = 0;
  for (int base : {2, 4, 8}) {
    PipelineConfig c = tiny_config();
    c.base_channels = base;
    c.max_channels = 64;
    ModelBundle models(c);
    std::size_t total = 0;
    for (const auto& name : kNetworkNames) total += models.parameter_count(name);
    CHECK(total > previous);
    previous = total;
  }
}

TEST_CASE("registries are prefixed per network") {
  ModelBundle models(tiny_config());
  for (const auto& name : kNetworkNames) {
    const nn::Registry r = models.registry(name);
    CHECK_FALSE(r.params.empty());
    for (const auto& p : r.params) CHECK(p.name.rfind(name + ".", 0) == 0);
  }
  CHECK(models.registry().params.size() ==
        models.registry("M").params.size() + models.registry("R").params.size() +
            models.registry("L").params.size() + models.registry("H").params.size());
}

TEST_CASE("H parameter gradients are finite and match finite differences") {
  ModelBundle models(tiny_config());
  RandomStream rng(5);
  const auto s = ag::Var::leaf(random_tensor(Shape{1, 3, 32, 32}, rng));
  const auto mu = ag::Var::leaf(random_tensor(Shape{1, 1, 32, 32}, rng));
  const auto pu = ag::Var::leaf(random_tensor(Shape{1, 1, 32, 32}, rng));
  const auto c = ag::Var::leaf(random_tensor(Shape{1, 3, 32, 32}, rng));
  const auto target = ag::Var::leaf(random_tensor(Shape{1, 3, 32, 32}, rng));
  const auto loss = [&] { return ag::mean_abs_diff(highres_forward(models, s, mu, pu, c, false), target); };

  ag::backward(loss());
  nn::Registry reg = models.registry("H");
  for (const auto& p : reg.params) {
    REQUIRE(p.var.has_grad());
    CHECK(all_finite(p.var.grad()));
  }
  for (std::size_t k : {std::size_t{0}, reg.params.size() / 2, reg.params.size() - 2}) {
    ag::Var param = reg.params[k].var;
    const auto idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(param.value().numel()) - 1));
    const double numeric = finite_difference(param.mutable_value(), idx, [&] {
      ag::NoGradGuard guard;
      return loss().item();
    });
    CAPTURE(reg.params[k].name);
    CHECK(param.grad().data()[idx] == doctest::Approx(numeric).epsilon(5e-2).scale(1e-3));
  }
}
