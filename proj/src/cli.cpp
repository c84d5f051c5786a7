#include "maskanim/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "maskanim/checkpoint.hpp"
#include "maskanim/config.hpp"
#include "maskanim/data.hpp"
#include "maskanim/errors.hpp"
#include "maskanim/image_io.hpp"
#include "maskanim/inference.hpp"
#include "maskanim/kernels.hpp"
#include "maskanim/metrics.hpp"
#include "maskanim/perturbation.hpp"
#include "maskanim/training.hpp"

namespace maskanim {

namespace fs = std::filesystem;

namespace {

// Bad invocation detected after parsing (missing input, bad combination).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_exists(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw UsageError(std::string(what) + " '" + p.string() + "' does not exist");
}

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Configuration file (INI sections)");
  cmd->add_option("--set", o.overrides, "Override, section.key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "Base seed (same as --set train.seed=N)");
  cmd->add_option("--workers", o.workers, "Kernel threads (same as --set train.workers=N)");
}

PipelineConfig resolve_config(const CommonOptions& o, PipelineConfig base = {}) {
  PipelineConfig config = base;
  if (!o.config_path.empty()) {
    require_exists(o.config_path, "config file");
    config = PipelineConfig::load(o.config_path);
  }
  for (const std::string& kv : o.overrides) config.apply_override(kv);
  if (o.seed) config.seed = *o.seed;
  if (o.workers) config.workers = *o.workers;
  if (config.vgg_weights.empty()) {
    if (const char* env = std::getenv("MASKANIM_VGG_WEIGHTS"); env != nullptr && *env != '\0') {
      config.vgg_weights = env;
    }
  }
  config.validate();
  return config;
}

void apply_workers(const PipelineConfig& config) {
  if (config.workers > 0) kernels::set_thread_count(config.workers);
}

// Records the resolved configuration, seeds and thread count next to the outputs.
void log_run(const fs::path& out_dir, const std::string& command, const PipelineConfig& config,
             std::ostream& out) {
  fs::create_directories(out_dir);
  std::ofstream(out_dir / "resolved_config.ini", std::ios::trunc) << config.to_ini();
  nlohmann::json run{{"command", command},
                     {"seed", config.seed},
                     {"data_seed", config.data_seed()},
                     {"perturbation_seed", config.perturbation_seed()},
                     {"init_seed", config.init_seed()},
                     {"workers", config.workers},
                     {"threads", kernels::thread_count()},
                     {"fingerprint", config.fingerprint()}};
  std::ofstream(out_dir / "run.json", std::ios::trunc) << run.dump(2) << '\n';
  out << "resolved config written to " << (out_dir / "resolved_config.ini").string() << " (seed "
      << config.seed << ", threads " << kernels::thread_count() << ")\n";
}

void write_clip(const fs::path& dir, const VideoClip& clip, const std::vector<fs::path>& names) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < clip.frames.size(); ++i) write_png(dir / names[i].filename(), clip.frames[i]);
}

int cmd_make_toy_data(const fs::path& out_dir, ToySpec spec, const std::string& object,
                      const std::string& background, const std::string& motion, std::ostream& out) {
  spec.object = parse_toy_object(object);
  spec.background = parse_toy_background(background);
  spec.motion = parse_toy_motion(motion);
  const VideoDataset ds = generate_toy_dataset(spec, out_dir);
  nlohmann::json info{{"videos", spec.num_videos},   {"frames", spec.frames_per_video},
                      {"resolution", spec.resolution}, {"seed", spec.seed},
                      {"object", object},             {"background", background},
                      {"motion", motion}};
  std::ofstream(out_dir / "toy_spec.json", std::ios::trunc) << info.dump(2) << '\n';
  out << "wrote " << ds.size() << " train videos to " << (out_dir / "train").string() << '\n';
  return kExitOk;
}

int cmd_train(const CommonOptions& common, const fs::path& data, const fs::path& out_dir,
              const std::string& resume, std::ostream& out) {
  const PipelineConfig config = resolve_config(common);
  require_exists(data, "data root");
  if (!resume.empty()) require_exists(resume, "checkpoint");
  apply_workers(config);
  log_run(out_dir, "train", config, out);
  const VideoDataset ds = load_video_dataset(data, "train", config.frame_resolution);
  for (const std::string& w : ds.warnings) out << "warning: " << w << '\n';
  TrainOptions options;
  options.out_dir = out_dir;
  options.resume = resume;
  options.on_step = [&out](const TrainBatchRecord& r) {
    out << "epoch " << r.epoch << " step " << r.step << " lr " << r.learning_rate << " total "
        << r.report.total << " mask " << r.report.mask_loss << " reconstruct "
        << r.report.reconstruct_loss << '\n';
  };
  const TrainResult result = train(config, ds, options);
  out << "wrote " << result.checkpoints.size() << " checkpoints; final "
      << result.checkpoints.back().string() << '\n';
  return kExitOk;
}

LoadedCheckpoint open_checkpoint(const std::string& path, const CommonOptions& common) {
  require_exists(path, "checkpoint");
  LoadedCheckpoint ck = load_checkpoint(path);
  ck.config = resolve_config(common, ck.config);
  if (ck.config.fingerprint() != ck.models.config().fingerprint()) {
    throw ConfigError("overrides change the model structure stored in " + path);
  }
  apply_workers(ck.config);
  return ck;
}

int cmd_reconstruct(const CommonOptions& common, const std::string& checkpoint,
                    const std::string& video, const std::string& data, const std::string& split,
                    const fs::path& out_dir, const std::string& mode_name, std::ostream& out) {
  if (video.empty() == data.empty()) throw UsageError("reconstruct needs exactly one of --video or --data");
  const AnimationMode mode = parse_animation_mode(mode_name);
  LoadedCheckpoint ck = open_checkpoint(checkpoint, common);
  log_run(out_dir, "reconstruct", ck.config, out);
  std::vector<fs::path> dirs;
  if (!video.empty()) {
    require_exists(video, "video directory");
    dirs.push_back(video);
  } else {
    require_exists(fs::path(data) / split, "split directory");
    for (const ClipEntry& c : load_video_dataset(data, split, ck.config.frame_resolution).clips) {
      dirs.push_back(c.directory);
    }
  }
  for (const fs::path& dir : dirs) {
    const std::vector<fs::path> names = list_frames(dir);
    const VideoClip clip = load_clip_directory(dir, ck.config.frame_resolution);
    const VideoClip generated = reconstruct_video(ck.models, clip, mode);
    write_clip(out_dir / clip.id, generated, {names.begin() + 1, names.end()});
    out << clip.id << ": " << generated.frames.size() << " frames\n";
  }
  return kExitOk;
}

int cmd_animate(const CommonOptions& common, const std::string& checkpoint, const std::string& source,
                const std::string& driving, const fs::path& out_dir, const std::string& mode_name,
                bool dump, std::ostream& out) {
  const AnimationMode mode = parse_animation_mode(mode_name);
  require_exists(source, "source frame");
  require_exists(driving, "driving directory");
  LoadedCheckpoint ck = open_checkpoint(checkpoint, common);
  log_run(out_dir, "animate", ck.config, out);
  const int res = ck.config.frame_resolution;
  Tensor s = read_png_tensor(source, 3);
  if (s.h() != res) s = resample(s, res);
  const Frame src(std::move(s));
  const std::vector<fs::path> names = list_frames(driving);
  const VideoClip clip = load_clip_directory(driving, res);
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < clip.frames.size(); ++i) {
    const AnimationResult r = animate_frame(ck.models, src, clip.frames[i], mode);
    write_png(out_dir / names[i].filename(), r.f);
    if (dump) dump_intermediates(out_dir / "intermediates" / names[i].stem(), src, clip.frames[i], r);
  }
  out << "animated " << clip.frames.size() << " frames (" << animation_mode_name(mode) << ")\n";
  return kExitOk;
}

int cmd_evaluate(const CommonOptions& common, const std::string& generated, const std::string& truth,
                 const std::string& detector, const std::string& embedder, const fs::path& out_dir,
                 std::ostream& out) {
  PipelineConfig config = resolve_config(common);
  if (!detector.empty()) config.detector = detector;
  if (!embedder.empty()) config.embedder = embedder;
  require_exists(generated, "generated directory");
  require_exists(truth, "truth directory");
  apply_workers(config);
  const auto det = make_detector(config.detector);
  const auto emb = make_embedder(config.embedder);
  log_run(out_dir, "evaluate", config, out);
  const MetricReport report = evaluate(generated, truth, det.get(), emb.get(), config);
  report.write(out_dir);
  out << "evaluated " << report.videos.size() << " videos:";
  for (const auto& [name, value] : report.aggregate) out << ' ' << name << '=' << value;
  out << '\n';
  return kExitOk;
}

int cmd_perturb(const CommonOptions& common, const std::string& op, const std::string& input,
                const std::string& output, std::ostream& out) {
  const PipelineConfig config = resolve_config(common);
  require_exists(input, "input mask");
  const Mask mask = read_mask_png(input);
  Mask result = mask;
  if (op == "test") {
    result = perturb_test(mask, config.perturbation);
  } else if (op == "train") {
    RandomStream rng(config.perturbation_seed());
    result = perturb_train(mask, rng, config.perturbation);
  } else {
    throw UsageError("--op must be test or train");
  }
  write_png(output, result);
  out << "perturb " << op << " seed " << config.seed << ": " << input << " -> " << output << '\n';
  return kExitOk;
}

int fail(std::ostream& err, const char* category, const std::string& message, int code) {
  std::string line = message;
  for (char& ch : line) {
    if (ch == '\n') ch = ' ';
  }
  err << "error: " << category << ": " << line << std::endl;
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mask-based image animation: toy data, training, reconstruction, animation, evaluation"};
  app.require_subcommand(1);

  ToySpec toy;
  std::string toy_out, toy_object = "square", toy_background = "solid", toy_motion = "drift";
  auto* make = app.add_subcommand("make-toy-data", "Write a synthetic toy dataset");
  make->add_option("--out", toy_out, "Output root")->required();
  make->add_option("--videos", toy.num_videos, "Training videos");
  make->add_option("--frames", toy.frames_per_video, "Frames per video");
  make->add_option("--res", toy.resolution, "Frame resolution");
  make->add_option("--seed", toy.seed, "Seed");
  make->add_option("--test-videos", toy.test_videos, "Test videos (default videos/4, at least 1)");
  make->add_option("--object", toy_object, "square | disc | figure");
  make->add_option("--background", toy_background, "solid | gradient | textured");
  make->add_option("--motion", toy_motion, "drift | swing | pulse");

  CommonOptions common;
  std::string data, out_dir, resume, checkpoint, video, split = "test", mode = "full", source,
                                                               driving, generated, truth, detector,
                                                               embedder, op, input, output;
  bool dump = false;

  auto* train_cmd = app.add_subcommand("train", "Train the four networks");
  add_common(train_cmd, common);
  train_cmd->add_option("--data", data, "Dataset root containing train/")->required();
  train_cmd->add_option("--out", out_dir, "Run directory")->required();
  train_cmd->add_option("--resume", resume, "Checkpoint to continue from");

  auto* recon = app.add_subcommand("reconstruct", "Reconstruct videos from their first frame");
  add_common(recon, common);
  recon->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  recon->add_option("--video", video, "One video directory");
  recon->add_option("--data", data, "Dataset root (all videos of --split)");
  recon->add_option("--split", split, "Split used with --data");
  recon->add_option("--mode", mode, "full | no_pert | no_ref | no_id");
  recon->add_option("--out", out_dir, "Output directory")->required();

  auto* animate = app.add_subcommand("animate", "Animate a source frame with a driving video");
  add_common(animate, common);
  animate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  animate->add_option("--source", source, "Source frame PNG")->required();
  animate->add_option("--driving", driving, "Driving video directory")->required();
  animate->add_option("--mode", mode, "full | no_pert | no_ref | no_id");
  animate->add_option("--out", out_dir, "Output directory")->required();
  animate->add_flag("--dump-intermediates", dump, "Write per-frame pipeline panels");

  auto* eval = app.add_subcommand("evaluate", "Compute reconstruction metrics");
  add_common(eval, common);
  eval->add_option("--generated", generated, "Generated videos root")->required();
  eval->add_option("--truth", truth, "Ground-truth videos root")->required();
  eval->add_option("--detector", detector, "toy | none | external:<path>");
  eval->add_option("--embedder", embedder, "toy | none | external:<path>");
  out_dir = ".";
  eval->add_option("--out", out_dir, "Report directory");

  auto* perturb = app.add_subcommand("perturb", "Apply a mask perturbation to a PNG");
  add_common(perturb, common);
  perturb->add_option("--op", op, "test | train")->required();
  perturb->add_option("input", input, "Input mask PNG")->required();
  perturb->add_option("output", output, "Output PNG")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return fail(err, "usage", e.what(), kExitUsage);
  }

  try {
    if (make->parsed()) return cmd_make_toy_data(toy_out, toy, toy_object, toy_background, toy_motion, out);
    if (train_cmd->parsed()) return cmd_train(common, data, out_dir, resume, out);
    if (recon->parsed()) return cmd_reconstruct(common, checkpoint, video, data, split, out_dir, mode, out);
    if (animate->parsed()) return cmd_animate(common, checkpoint, source, driving, out_dir, mode, dump, out);
    if (eval->parsed()) return cmd_evaluate(common, generated, truth, detector, embedder, out_dir, out);
    if (perturb->parsed()) return cmd_perturb(common, op, input, output, out);
  } catch (const UsageError& e) {
    return fail(err, "usage", e.what(), kExitUsage);
  } catch (const ConfigError& e) {
    return fail(err, "config", e.what(), kExitUsage);
  } catch (const IoError& e) {
    return fail(err, "io", e.what(), kExitRuntime);
  } catch (const TrainingDivergedError& e) {
    return fail(err, "diverged", e.what(), kExitRuntime);
  } catch (const UndefinedMetricError& e) {
    return fail(err, "metric", e.what(), kExitRuntime);
  } catch (const std::exception& e) {
    return fail(err, "runtime", e.what(), kExitRuntime);
  }
  return fail(err, "usage", "no subcommand", kExitUsage);
}

}  // namespace maskanim
