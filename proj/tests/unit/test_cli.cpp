#include <doctest.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "maskanim/cli.hpp"
#include "maskanim/config.hpp"
#include "maskanim/data.hpp"
#include "maskanim/image_io.hpp"
#include "support.hpp"

using namespace maskanim;
using maskanim::testing::scratch_dir;

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_png(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ".png" ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("usage errors exit with code 2 and one error line") {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {},
           {"frobnicate"},
           {"make-toy-data"},
           {"make-toy-data", "--out", "x", "--bogus", "1"},
           {"train", "--data", "/nonexistent", "--out", "/tmp/x"},
           {"reconstruct", "--checkpoint", "/nonexistent.ckpt", "--video", "v", "--out", "o"},
       }) {
    const Run r = cli(args);
    CAPTURE(r.err);
    CHECK(r.code == kExitUsage);
  }
  const Run bad_set = cli({"make-toy-data", "--out", scratch_dir("cli_bad").string(), "--res", "0"});
  CHECK(bad_set.code == kExitUsage);
  CHECK(bad_set.err.rfind("error: ", 0) == 0);
  CHECK(std::count(bad_set.err.begin(), bad_set.err.end(), '\n') == 1);
}

TEST_CASE("invalid config overrides are usage errors") {
  const auto root = scratch_dir("cli_config");
  REQUIRE(cli({"make-toy-data", "--out", (root / "data").string(), "--videos", "1", "--frames", "2",
               "--res", "32"}).code == kExitOk);
  const Run r = cli({"train", "--data", (root / "data").string(), "--out", (root / "run").string(),
                     "--set", "model.mask_resolution=5"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("error: config:") == 0);
  const Run unknown = cli({"train", "--data", (root / "data").string(), "--out", (root / "run").string(),
                           "--set", "model.wings=2"});
  CHECK(unknown.code == kExitUsage);
}

TEST_CASE("toy data, train, reconstruct, animate and evaluate end to end") {
  const auto root = scratch_dir("cli_flow");
  const auto data = root / "data";
  Run r = cli({"make-toy-data", "--out", data.string(), "--videos", "2", "--frames", "8", "--res", "32",
               "--seed", "7"});
  REQUIRE(r.code == kExitOk);
  CHECK(fs::is_directory(data / "train" / "vid_000"));
  CHECK(fs::is_directory(data / "test" / "vid_000"));

  std::ofstream(root / "tiny.cfg") << maskanim::testing::tiny_config().to_ini();
  const auto run = root / "run";
  r = cli({"train", "--config", (root / "tiny.cfg").string(), "--data", data.string(), "--out", run.string(),
           "--set", "train.epochs=1", "--set", "train.batch_size=2", "--seed", "3", "--workers", "1"});
  REQUIRE(r.code == kExitOk);
  CHECK(fs::exists(run / "final.ckpt"));
  CHECK(fs::exists(run / "resolved_config.ini"));
  const PipelineConfig resolved = PipelineConfig::load(run / "resolved_config.ini");
  CHECK(resolved.epochs == 1);
  CHECK(resolved.seed == 3);
  std::ifstream run_json(run / "run.json");
  const auto meta = nlohmann::json::parse(run_json);
  CHECK(meta["seed"] == 3);
  CHECK(meta["data_seed"] == resolved.data_seed());
  CHECK(meta["workers"] == 1);

  const auto gen = root / "gen";
  r = cli({"reconstruct", "--checkpoint", (run / "final.ckpt").string(), "--video",
           (data / "test" / "vid_000").string(), "--out", gen.string()});
  REQUIRE(r.code == kExitOk);
  CHECK(count_png(gen / "vid_000") == 7);
  CHECK_FALSE(fs::exists(gen / "vid_000" / "frame_00000.png"));
  CHECK(fs::exists(gen / "vid_000" / "frame_00007.png"));

  r = cli({"evaluate", "--generated", gen.string(), "--truth", (data / "test").string(), "--detector", "toy",
           "--out", (root / "eval").string()});
  REQUIRE(r.code == kExitOk);
  std::ifstream csv(root / "eval" / "report.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header.find("ssim") != std::string::npos);
  CHECK(header.find("l1") != std::string::npos);

  const auto anim = root / "anim";
  r = cli({"animate", "--checkpoint", (run / "final.ckpt").string(), "--source",
           (data / "train" / "vid_001" / "frame_00000.png").string(), "--driving",
           (data / "test" / "vid_000").string(), "--mode", "no_ref", "--out", anim.string(),
           "--dump-intermediates"});
  REQUIRE(r.code == kExitOk);
  CHECK(count_png(anim) == 8);
  CHECK(fs::exists(anim / "intermediates" / "frame_00003" / "m_d.png"));

  r = cli({"perturb", "--op", "test", (data / "test" / "vid_000" / "mask_00000.png").string(),
           (root / "p.png").string()});
  CHECK(r.code == kExitOk);
  CHECK(read_mask_png(root / "p.png").resolution() == 32);

  // Inputs are untouched and missing inputs are reported as usage errors.
  CHECK(count_png(data / "test" / "vid_000") == 16);
  r = cli({"evaluate", "--generated", (root / "missing").string(), "--truth", (data / "test").string()});
  CHECK(r.code == kExitUsage);
}
