#include <doctest.h>

#include <stdexcept>

#include "maskanim/errors.hpp"
#include "maskanim/inference.hpp"
#include "maskanim/perturbation.hpp"
#include "support.hpp"

using namespace maskanim;
using maskanim::testing::random_frame;
using maskanim::testing::scratch_dir;
using maskanim::testing::tiny_config;

namespace {

VideoClip random_clip(int frames, RandomStream& rng) {
  VideoClip c{"clip", {}};
  for (int i = 0; i < frames; ++i) c.frames.push_back(random_frame(32, rng));
  return c;
}

}  // namespace

TEST_CASE("full mode returns six range-valid intermediates") {
  ModelBundle models(tiny_config());
  RandomStream rng(1);
  const Frame s = random_frame(32, rng);
  const Frame d = random_frame(32, rng);
  const AnimationResult r = animate_frame(models, s, d);
  const auto parts = r.intermediates();
  REQUIRE(parts.size() == 6);
  const char* names[] = {"s_small", "m_s", "Md", "p", "m_d", "c"};
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(parts[i].first == names[i]);
    CHECK(min_value(parts[i].second) >= 0.0f);
    CHECK(max_value(parts[i].second) <= 1.0f);
  }
  CHECK(r.f.resolution() == 32);
  CHECK(r.m_d.resolution() == 8);
  CHECK(r.p == perturb_test(r.driver_mask));
  CHECK(animate_frame(models, s, d).f == r.f);
}

TEST_CASE("ablation modes satisfy their definitions") {
  ModelBundle models(tiny_config());
  RandomStream rng(2);
  const Frame s = random_frame(32, rng);
  const Frame d = random_frame(32, rng);
  const Mask driver = models.mask(d);

  const AnimationResult no_id = animate_frame(models, s, d, AnimationMode::no_id);
  CHECK(no_id.m_d == driver);
  CHECK(no_id.p == driver);

  const AnimationResult no_ref = animate_frame(models, s, d, AnimationMode::no_ref);
  CHECK(no_ref.m_d == no_ref.p);
  CHECK(no_ref.p == perturb_test(driver));

  const AnimationResult no_pert = animate_frame(models, s, d, AnimationMode::no_pert);
  CHECK(no_pert.p == driver);
  CHECK(no_pert.m_d == models.refine(downscale(s, 8), models.mask(s), driver));

  for (const auto* name : {"full", "no_pert", "no_ref", "no_id"}) {
    CHECK(std::string(animation_mode_name(parse_animation_mode(name))) == name);
  }
  CHECK_THROWS_AS((void)parse_animation_mode("partial"), ConfigError);
}

TEST_CASE("the threshold is recomputed for every driving frame") {
  ModelBundle models(tiny_config());
  RandomStream rng(3);
  const Frame s = random_frame(32, rng);
  VideoClip clip{"two", {Frame::filled(32, 0.1f), Frame::filled(32, 0.9f)}};
  const AnimationResult a = animate_frame(models, s, clip.frames[0]);
  const AnimationResult b = animate_frame(models, s, clip.frames[1]);
  const float rho_a = median_value(a.driver_mask);
  const float rho_b = median_value(b.driver_mask);
  REQUIRE(rho_a != rho_b);
  for (const AnimationResult* r : {&a, &b}) {
    const float rho = median_value(r->driver_mask);
    CHECK(r->p == perturb_test(r->driver_mask));
    // Before shrinking, P_test keeps exactly the pixels at or above the frame's own median.
    const Mask kept = median_threshold(r->driver_mask);
    for (float v : kept.tensor().values()) CHECK((v == 0.0f || v >= rho));
  }
  // Reusing the other frame's threshold would give a different p.
  Tensor foreign = b.driver_mask.tensor();
  for (float& v : foreign.values()) v = v < rho_a ? 0.0f : v;
  CHECK(scale_about_center(Mask(foreign), 0.75) != b.p);
}

TEST_CASE("videos are animated frame by frame") {
  ModelBundle models(tiny_config());
  RandomStream rng(4);
  const Frame s = random_frame(32, rng);
  VideoClip driving = random_clip(4, rng);
  const VideoClip out = animate_video(models, s, driving);
  REQUIRE(out.frames.size() == 4);

  std::swap(driving.frames[1], driving.frames[2]);
  const VideoClip swapped = animate_video(models, s, driving);
  CHECK(swapped.frames[1] == out.frames[2]);
  CHECK(swapped.frames[2] == out.frames[1]);
  CHECK(swapped.frames[0] == out.frames[0]);

  const VideoClip repeated{"rep", {driving.frames[0], driving.frames[0], driving.frames[0]}};
  const VideoClip rep_out = animate_video(models, s, repeated);
  CHECK(rep_out.frames[0] == rep_out.frames[1]);
  CHECK(rep_out.frames[1] == rep_out.frames[2]);
}

TEST_CASE("reconstruction uses the first frame as source") {
  ModelBundle models(tiny_config());
  RandomStream rng(5);
  for (int n : {2, 5}) {
    const VideoClip clip = random_clip(n, rng);
    const VideoClip out = reconstruct_video(models, clip);
    REQUIRE(out.frames.size() == static_cast<std::size_t>(n - 1));
    for (int i = 0; i + 1 < n; ++i) {
      CHECK(out.frames[static_cast<std::size_t>(i)] ==
            animate_frame(models, clip.frames[0], clip.frames[static_cast<std::size_t>(i) + 1]).f);
    }
  }
  const VideoClip single{"one", {Frame::filled(32, 0.5f)}};
  CHECK_THROWS_AS((void)reconstruct_video(models, single), std::invalid_argument);
  CHECK_THROWS_AS((void)animate_frame(models, Frame::filled(16, 0.5f), Frame::filled(32, 0.5f)),
                  std::invalid_argument);
}

TEST_CASE("intermediate dumps name every panel") {
  ModelBundle models(tiny_config());
  RandomStream rng(6);
  const Frame s = random_frame(32, rng);
  const Frame d = random_frame(32, rng);
  const auto dir = scratch_dir("dump");
  dump_intermediates(dir, s, d, animate_frame(models, s, d));
  for (const char* name : {"s", "m_s", "d", "Md", "p", "m_d", "c", "f"}) {
    CHECK(std::filesystem::exists(dir / (std::string(name) + ".png")));
  }
}
