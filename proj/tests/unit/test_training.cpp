#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <set>
#include <stdexcept>

#include "maskanim/data.hpp"
#include "maskanim/errors.hpp"
#include "maskanim/perturbation.hpp"
#include "maskanim/training.hpp"
#include "support.hpp"

using namespace maskanim;
using maskanim::testing::random_tensor;
using maskanim::testing::scratch_dir;
using maskanim::testing::tiny_config;

namespace fs = std::filesystem;

namespace {

std::map<std::string, std::uint64_t> hashes(ModelBundle& models) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& name : kNetworkNames) out[name] = models.parameter_hash(name);
  return out;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

// Returns the networks whose parameters changed after one step with `terms`.
std::set<std::string> changed_by(TermSelection terms, bool freeze_mask_on_coarse = false) {
  PipelineConfig config = tiny_config();
  config.freeze_mask_on_coarse = freeze_mask_on_coarse;
  TrainState state(config);
  state.epoch = 1;
  RandomStream rng(11);
  const Tensor s = random_tensor(Shape{2, 3, 32, 32}, rng);
  const Tensor d = random_tensor(Shape{2, 3, 32, 32}, rng);
  const auto before = hashes(state.models);
  (void)train_step(state, s, d, terms);
  const auto after = hashes(state.models);
  std::set<std::string> changed;
  for (const auto& [name, h] : before) {
    if (after.at(name) != h) changed.insert(name);
  }
  return changed;
}

PipelineConfig toy_train_config() {
  PipelineConfig c = tiny_config();
  c.epochs = 2;
  c.batch_size = 2;
  c.lr_decay_epochs = {};
  c.workers = 1;
  return c;
}

VideoDataset toy_dataset(const fs::path& root, int videos = 4) {
  ToySpec spec;
  spec.num_videos = videos;
  spec.frames_per_video = 4;
  spec.resolution = 32;
  spec.test_videos = 0;
  return generate_toy_dataset(spec, root);
}

}  // namespace

TEST_CASE("learning-rate milestones") {
  const PipelineConfig c;
  CHECK(lr_schedule(0, c) == doctest::Approx(2e-4));
  CHECK(lr_schedule(59, c) == doctest::Approx(2e-4));
  CHECK(lr_schedule(60, c) == doctest::Approx(2e-5));
  CHECK(lr_schedule(95, c) == doctest::Approx(2e-6));
  CHECK_THROWS_AS((void)lr_schedule(100, c), std::invalid_argument);
  CHECK_THROWS_AS((void)lr_schedule(-1, c), std::invalid_argument);
}

TEST_CASE("gradient routing per loss term") {
  CHECK(changed_by({true, false, false}) == std::set<std::string>{"R"});
  CHECK(changed_by({false, false, true}) == std::set<std::string>{"H"});
  CHECK(changed_by({false, true, false}) == std::set<std::string>{"M", "L"});
  CHECK(changed_by({false, true, false}, true) == std::set<std::string>{"L"});
  CHECK(changed_by({true, true, true}) == std::set<std::string>{"M", "R", "L", "H"});
}

TEST_CASE("refinement stays idle in the first epoch") {
  TrainState state(tiny_config());
  RandomStream rng(1);
  const Tensor s = random_tensor(Shape{2, 3, 32, 32}, rng);
  const Tensor d = random_tensor(Shape{2, 3, 32, 32}, rng);
  const std::uint64_t r_before = state.models.parameter_hash("R");
  const TrainBatchRecord rec = train_step(state, s, d);
  CHECK_FALSE(rec.report.has_mask);
  CHECK(rec.report.mask_loss == 0.0);
  CHECK(state.models.parameter_hash("R") == r_before);
  CHECK(rec.report.total == combined_loss(0.0, rec.report.reconstruct_loss, 100.0, 10.0));

  state.epoch = 1;
  const TrainBatchRecord later = train_step(state, s, d);
  CHECK(later.report.has_mask);
  CHECK(later.report.total ==
        combined_loss(later.report.mask_loss, later.report.reconstruct_loss, 100.0, 10.0));
  CHECK(state.global_step == 2);
}

TEST_CASE("identical states give identical steps") {
  RandomStream rng(2);
  const Tensor s = random_tensor(Shape{2, 3, 32, 32}, rng);
  const Tensor d = random_tensor(Shape{2, 3, 32, 32}, rng);
  TrainState a(tiny_config());
  TrainState b(tiny_config());
  a.epoch = b.epoch = 1;
  for (int i = 0; i < 2; ++i) {
    const auto ra = train_step(a, s, d);
    const auto rb = train_step(b, s, d);
    CHECK(log_line(ra) == log_line(rb));
  }
  CHECK(hashes(a.models) == hashes(b.models));
}

TEST_CASE("a single fixed pair is overfit") {
  PipelineConfig config = tiny_config();
  config.refinement_start_epoch = 0;
  TrainState state(config);
  RandomStream rng(3);
  const VideoDataset ds = toy_dataset(scratch_dir("overfit_pair"), 1);
  const TrainingPair pair = sample_pair(ds, rng);
  const Tensor s = pair.source.tensor();
  const Tensor d = pair.driving.tensor();
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 200; ++step) {
    const double total = train_step(state, s, d).report.total;
    if (step == 0) first = total;
    last = total;
  }
  MESSAGE("total loss " << first << " -> " << last);
  CHECK(last <= 0.5 * first);
}

TEST_CASE("epoch plans visit every clip pairs_per_video times") {
  RandomStream rng(4);
  const auto plan = plan_epoch(5, 3, rng);
  REQUIRE(plan.size() == 15);
  std::map<std::size_t, int> counts;
  for (std::size_t i : plan) ++counts[i];
  for (const auto& [clip, n] : counts) CHECK(n == 3);
  RandomStream again(4);
  CHECK(plan_epoch(5, 3, again) == plan);
}

TEST_CASE("training writes checkpoints and ordered logs, and resumes exactly") {
  const auto root = scratch_dir("train");
  const VideoDataset ds = toy_dataset(root / "data");
  const PipelineConfig config = toy_train_config();

  const TrainResult full = train(config, ds, {root / "full", {}, {}});
  CHECK(full.checkpoints.size() == 3);
  for (const char* name : {"epoch_001.ckpt", "epoch_002.ckpt", "final.ckpt"}) {
    CHECK(fs::exists(root / "full" / name));
  }
  const auto lines = read_lines(root / "full" / "train_log.jsonl");
  REQUIRE(lines.size() == 4);  // 2 epochs x 2 batches
  std::int64_t previous = 0;
  for (const auto& line : lines) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["step"].get<std::int64_t>() == previous + 1);
    previous = j["step"].get<std::int64_t>();
  }
  CHECK(read_lines(root / "full" / "train_log.csv").size() == 5);
  CHECK(read_lines(root / "full" / "timing.jsonl").size() == 4);
  CHECK(nlohmann::json::parse(lines[0])["has_mask"] == false);
  CHECK(nlohmann::json::parse(lines[3])["has_mask"] == true);

  const TrainResult resumed = train(config, ds, {root / "resumed", root / "full" / "epoch_001.ckpt", {}});
  const auto tail = read_lines(root / "resumed" / "train_log.jsonl");
  REQUIRE(tail.size() == 2);
  CHECK(tail[0] == lines[2]);
  CHECK(tail[1] == lines[3]);
  CHECK(resumed.info.global_step == full.info.global_step);

  LoadedCheckpoint a = load_checkpoint(root / "full" / "final.ckpt");
  LoadedCheckpoint b = load_checkpoint(root / "resumed" / "final.ckpt");
  CHECK(hashes(a.models) == hashes(b.models));
  CHECK(a.info.epoch == 2);
}

TEST_CASE("training rejects mismatched datasets") {
  const auto root = scratch_dir("train_mismatch");
  const VideoDataset ds = toy_dataset(root / "data");
  PipelineConfig config = toy_train_config();
  config.frame_resolution = 64;
  config.mask_resolution = 16;
  CHECK_THROWS_AS((void)train(config, ds, {root / "out", {}, {}}), ConfigError);
}

TEST_CASE("a non-finite loss aborts with a batch dump") {
  TrainState state(tiny_config());
  state.diagnostics_dir = scratch_dir("nan") / "nan_dump";
  nn::Registry reg = state.models.registry("H");
  reg.params.front().var.mutable_value().data()[0] = std::numeric_limits<float>::quiet_NaN();
  RandomStream rng(5);
  const Tensor s = random_tensor(Shape{1, 3, 32, 32}, rng);
  CHECK_THROWS_AS((void)train_step(state, s, s), TrainingDivergedError);
  CHECK(fs::exists(state.diagnostics_dir));
  CHECK_FALSE(fs::is_empty(state.diagnostics_dir));
}
