#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <nlohmann/json.hpp>

#include "maskanim/data.hpp"
#include "maskanim/errors.hpp"
#include "maskanim/image_io.hpp"
#include "support.hpp"

using namespace maskanim;
using maskanim::testing::random_frame;
using maskanim::testing::scratch_dir;

namespace fs = std::filesystem;

namespace {

void write_video(const fs::path& dir, int frames, int resolution, RandomStream& rng) {
  fs::create_directories(dir);
  for (int i = 0; i < frames; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05d.png", i);
    write_png(dir / name, random_frame(resolution, rng));
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("datasets load clips in id order and skip short clips") {
  const auto root = scratch_dir("dataset");
  RandomStream rng(1);
  for (const char* id : {"c", "a", "b"}) write_video(root / "train" / id, 10, 16, rng);
  write_video(root / "train" / "lonely", 1, 16, rng);

  const VideoDataset ds = load_video_dataset(root, "train", 16);
  REQUIRE(ds.size() == 3);
  CHECK(ds.clips[0].id == "a");
  CHECK(ds.clips[1].id == "b");
  CHECK(ds.clips[2].id == "c");
  for (const auto& clip : ds.clips) CHECK(clip.frames.size() == 10);
  REQUIRE(ds.warnings.size() == 1);
  CHECK(ds.warnings[0].find("lonely") != std::string::npos);

  const VideoDataset again = load_video_dataset(root, "train", 16);
  for (std::size_t i = 0; i < 3; ++i) CHECK(again.clips[i].frames == ds.clips[i].frames);

  const VideoDataset resized = load_video_dataset(root, "train", 8);
  CHECK(resized.load_frame(0, 3).resolution() == 8);
  CHECK(ds.load_clip(1).frames.size() == 10);

  CHECK_THROWS_AS((void)load_video_dataset(root, "test", 16), IoError);
}

TEST_CASE("a two-frame clip yields only the two ordered pairs") {
  const auto root = scratch_dir("dataset_two");
  RandomStream rng(2);
  write_video(root / "train" / "v", 2, 8, rng);
  const VideoDataset ds = load_video_dataset(root, "train", 8);
  RandomStream sampler(3);
  for (int i = 0; i < 50; ++i) {
    const TrainingPair p = sample_pair(ds, sampler);
    CHECK(p.source_index + p.driving_index == 1);
    CHECK(p.source == ds.load_frame(0, p.source_index));
  }
}

TEST_CASE("ordered pair frequencies are uniform") {
  RandomStream rng(4);
  std::map<std::pair<std::size_t, std::size_t>, int> counts;
  const int samples = 10000;
  for (int i = 0; i < samples; ++i) {
    const auto [s, d] = sample_frame_indices(10, rng);
    REQUIRE(s != d);
    REQUIRE(s < 10);
    REQUIRE(d < 10);
    ++counts[{s, d}];
  }
  CHECK(counts.size() == 90);
  const double expected = samples / 90.0;
  for (const auto& [pair, n] : counts) {
    CAPTURE(pair.first);
    CAPTURE(pair.second);
    CHECK(std::fabs(n - expected) <= 0.25 * expected);
  }
}

TEST_CASE("fixed seeds give fixed pair sequences") {
  RandomStream a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(sample_frame_indices(7, a) == sample_frame_indices(7, b));
}

TEST_CASE("object keypoints are the centroid and bounding-box corners") {
  Tensor m(Shape{1, 1, 8, 8}, 0.0f);
  for (int y = 2; y <= 4; ++y)
    for (int x = 1; x <= 5; ++x) m.at(0, 0, y, x) = 1.0f;
  const auto kp = object_keypoints(m);
  REQUIRE(kp.size() == 5);
  CHECK(kp[0].x == doctest::Approx(3.0));
  CHECK(kp[0].y == doctest::Approx(3.0));
  CHECK((kp[1].x == 1.0 && kp[1].y == 2.0));
  CHECK((kp[2].x == 5.0 && kp[2].y == 2.0));
  CHECK((kp[3].x == 1.0 && kp[3].y == 4.0));
  CHECK((kp[4].x == 5.0 && kp[4].y == 4.0));
  for (const auto& k : kp) CHECK(k.detected);
  for (const auto& k : object_keypoints(Tensor(Shape{1, 1, 4, 4}, 0.0f))) CHECK_FALSE(k.detected);
}

TEST_CASE("toy dataset layout, determinism and centroids") {
  ToySpec spec;
  spec.num_videos = 4;
  spec.frames_per_video = 8;
  spec.resolution = 64;
  spec.seed = 7;
  const auto a = scratch_dir("toy_a");
  const auto b = scratch_dir("toy_b");
  const VideoDataset ds = generate_toy_dataset(spec, a);
  (void)generate_toy_dataset(spec, b);
  REQUIRE(ds.size() == 4);
  CHECK(load_video_dataset(a, "test", 64).size() == 1);

  for (const auto& clip : ds.clips) {
    CHECK(clip.frames.size() == 8);
    int masks = 0;
    for (const auto& entry : fs::directory_iterator(clip.directory)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("mask_", 0) == 0) ++masks;
      CHECK(slurp(entry.path()) == slurp(b / "train" / clip.id / name));
    }
    CHECK(masks == 8);

    const auto json = nlohmann::json::parse(slurp(clip.directory / "keypoints.json"));
    CHECK(json["resolution"] == 64);
    REQUIRE(json["frames"].size() == 8);
    for (int t = 0; t < 8; ++t) {
      char name[32];
      std::snprintf(name, sizeof(name), "mask_%05d.png", t);
      const Mask m = read_mask_png(clip.directory / name);
      double mass = 0.0, mx = 0.0, my = 0.0;
      for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
          const double v = m.tensor().at(0, 0, y, x);
          CHECK((v == 0.0 || v == 1.0));
          mass += v;
          mx += v * x;
          my += v * y;
        }
      REQUIRE(mass > 0.0);
      const auto& centroid = json["frames"][t]["keypoints"][0];
      CHECK(std::fabs(centroid[0].get<double>() - mx / mass) <= 0.5);
      CHECK(std::fabs(centroid[1].get<double>() - my / mass) <= 0.5);
    }
  }

  ToySpec other = spec;
  other.seed = 8;
  const auto c = scratch_dir("toy_c");
  (void)generate_toy_dataset(other, c);
  CHECK(slurp(a / "train" / "vid_000" / "frame_00000.png") != slurp(c / "train" / "vid_000" / "frame_00000.png"));
}

TEST_CASE("every toy variant renders") {
  for (const char* object : {"square", "disc", "figure"})
    for (const char* background : {"solid", "gradient", "textured"})
      for (const char* motion : {"drift", "swing", "pulse"}) {
        ToySpec spec;
        spec.num_videos = 1;
        spec.frames_per_video = 3;
        spec.resolution = 32;
        spec.test_videos = 0;
        spec.object = parse_toy_object(object);
        spec.background = parse_toy_background(background);
        spec.motion = parse_toy_motion(motion);
        const VideoDataset ds = generate_toy_dataset(spec, scratch_dir("toy_variant"));
        CHECK(ds.size() == 1);
        CHECK(ds.load_clip(0).frames.size() == 3);
      }
  CHECK_THROWS_AS((void)parse_toy_object("triangle"), ConfigError);
}
