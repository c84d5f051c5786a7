#include "maskanim/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "maskanim/errors.hpp"
#include "maskanim/image_io.hpp"
#include "maskanim/perturbation.hpp"

namespace maskanim {

namespace fs = std::filesystem;

double lr_schedule(int epoch, const PipelineConfig& config) {
  if (epoch < 0 || epoch >= config.epochs) {
    throw std::invalid_argument("lr_schedule: epoch " + std::to_string(epoch) + " outside [0, " +
                                std::to_string(config.epochs) + ")");
  }
  double lr = config.learning_rate;
  for (int milestone : config.lr_decay_epochs) {
    if (epoch >= milestone) lr *= config.lr_decay_factor;
  }
  return lr;
}

TrainState::TrainState(const PipelineConfig& cfg)
    : config(cfg),
      models(cfg),
      optimizer(cfg.beta1, cfg.beta2, cfg.adam_eps),
      extractor(make_feature_extractor(cfg)),
      data_rng(cfg.data_seed()),
      perturbation_rng(cfg.perturbation_seed()) {}

CheckpointInfo TrainState::checkpoint_info() const {
  return {epoch, global_step, {{"data", data_rng.state()}, {"perturbation", perturbation_rng.state()}}};
}

void TrainState::restore(const fs::path& checkpoint) {
  LoadedCheckpoint loaded = load_checkpoint(checkpoint, &config);
  models = std::move(loaded.models);
  optimizer = std::move(loaded.optimizer);
  epoch = loaded.info.epoch;
  global_step = loaded.info.global_step;
  const auto& rng = loaded.info.rng_states;
  if (rng.count("data") == 0 || rng.count("perturbation") == 0) {
    throw IoError(checkpoint.string() + ": checkpoint lacks random stream states");
  }
  data_rng.restore(rng.at("data"));
  perturbation_rng.restore(rng.at("perturbation"));
}

namespace {

ag::Var constant(Tensor t) { return ag::Var::leaf(std::move(t)); }

Tensor jitter_batch(const Tensor& frames, RandomStream& rng, const PerturbationConfig& pert) {
  std::vector<Tensor> out;
  for (int i = 0; i < frames.n(); ++i) {
    const JitterParams params = sample_jitter(rng, pert);
    out.push_back(color_jitter(Frame(frames.sample(i)), params, pert).tensor());
  }
  return stack(out);
}

Tensor perturb_batch(const Tensor& masks, RandomStream& rng, const PerturbationConfig& pert) {
  std::vector<Tensor> out;
  for (int i = 0; i < masks.n(); ++i) {
    out.push_back(perturb_train(Mask(masks.sample(i)), rng, pert).tensor());
  }
  return stack(out);
}

void dump_batch(const fs::path& dir, const Tensor& sources, const Tensor& drivings,
                const TrainBatchRecord& record) {
  fs::create_directories(dir);
  for (int i = 0; i < sources.n(); ++i) {
    write_png(dir / ("source_" + std::to_string(i) + ".png"), sources.sample(i));
    write_png(dir / ("driving_" + std::to_string(i) + ".png"), drivings.sample(i));
  }
  std::ofstream(dir / "record.json") << log_line(record) << '\n';
}

}  // namespace

TrainBatchRecord train_step(TrainState& state, const Tensor& sources, const Tensor& drivings,
                            TermSelection terms) {
  const auto started = std::chrono::steady_clock::now();
  const PipelineConfig& cfg = state.config;
  if (sources.shape() != drivings.shape() || sources.n() < 1) {
    throw std::invalid_argument("train_step: source and driving batches must share one shape");
  }
  ModelBundle& models = state.models;
  const int frame_res = cfg.frame_resolution;
  const int mask_res = cfg.mask_resolution;
  const bool refinement_active = terms.mask && state.epoch >= cfg.refinement_start_epoch;

  TrainBatchRecord record;
  record.epoch = state.epoch;
  record.step = state.global_step + 1;
  record.learning_rate = lr_schedule(state.epoch, cfg);
  record.batch_size = sources.n();

  const ag::Var s = constant(sources);
  const ag::Var s_small = constant(resample(sources, mask_res));
  const ag::Var jittered = constant(jitter_batch(drivings, state.perturbation_rng, cfg.perturbation));

  const bool need_masks = refinement_active || terms.coarse || terms.fine;
  ag::Var m_s;
  ag::Var target;
  if (need_masks) {
    m_s = mask_forward(models, s, true);
    target = mask_forward(models, jittered, true);
  }

  std::vector<std::pair<double, ag::Var>> weighted;
  LossReport& report = record.report;

  if (refinement_active) {
    const ag::Var target_fixed = target.detach();
    const ag::Var perturbed =
        constant(perturb_batch(target_fixed.value(), state.perturbation_rng, cfg.perturbation));
    const ag::Var m_d = refine_forward(models, s_small, m_s.detach(), perturbed, true);
    const ag::Var l_mask = mask_loss(m_d, target_fixed);
    report.has_mask = true;
    report.mask_loss = l_mask.item();
    weighted.emplace_back(cfg.lambda_mask, l_mask);
  }

  if (terms.coarse || terms.fine) {
    const ag::Var m_s_c = cfg.freeze_mask_on_coarse ? m_s.detach() : m_s;
    const ag::Var target_c = cfg.freeze_mask_on_coarse ? target.detach() : target;
    // The coarse prediction feeds H even when only the f-branch is trained.
    ag::Var c;
    if (terms.coarse) {
      c = lowres_forward(models, s_small, m_s_c, target_c, true);
    } else {
      ag::NoGradGuard guard;
      c = lowres_forward(models, s_small, m_s.detach(), target.detach(), true);
    }
    ag::Var f;
    if (terms.fine) {
      f = highres_forward(models, s, constant(resample(m_s.value(), frame_res)),
                          constant(resample(target.value(), frame_res)), c.detach(), true);
    }
    const ReconstructionLoss rec =
        reconstruction_loss(*state.extractor, c, f, constant(drivings), cfg.effective_reconstruct_scales(),
                            {terms.coarse, terms.fine});
    report.reconstruct_loss = rec.total();
    report.breakdown = rec.breakdown;
    if (terms.coarse) weighted.emplace_back(cfg.lambda_reconstruct, rec.coarse);
    if (terms.fine) weighted.emplace_back(cfg.lambda_reconstruct, rec.fine);
  }
  report.total =
      combined_loss(report.mask_loss, report.reconstruct_loss, cfg.lambda_mask, cfg.lambda_reconstruct);

  if (!std::isfinite(report.total)) {
    if (!state.diagnostics_dir.empty()) dump_batch(state.diagnostics_dir, sources, drivings, record);
    throw TrainingDivergedError("non-finite loss at epoch " + std::to_string(state.epoch) +
                                ", step " + std::to_string(record.step) +
                                (state.diagnostics_dir.empty()
                                     ? std::string()
                                     : "; batch written to " + state.diagnostics_dir.string()));
  }

  if (!weighted.empty()) {
    const ag::Var total = ag::weighted_sum(weighted);
    if (total.requires_grad()) ag::backward(total);
    state.optimizer.step(models.registry().params, record.learning_rate);
  }
  ++state.global_step;
  record.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return record;
}

std::vector<std::size_t> plan_epoch(std::size_t clips, int pairs_per_video, RandomStream& rng) {
  std::vector<std::size_t> order;
  for (int r = 0; r < pairs_per_video; ++r) {
    for (std::size_t i = 0; i < clips; ++i) order.push_back(i);
  }
  // Fisher-Yates with the stream's own integer draws, identical on every platform.
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::string log_line(const TrainBatchRecord& record) {
  nlohmann::json j;
  j["epoch"] = record.epoch;
  j["step"] = record.step;
  j["lr"] = record.learning_rate;
  j["batch_size"] = record.batch_size;
  j["has_mask"] = record.report.has_mask;
  for (const auto& [key, value] : record.report.record()) j[key] = value;
  return j.dump();
}

namespace {

std::string csv_header(const TrainBatchRecord& record) {
  std::string line = "epoch,step,lr,batch_size,has_mask";
  for (const auto& entry : record.report.record()) line += "," + entry.first;
  return line;
}

std::string csv_row(const TrainBatchRecord& record) {
  char buf[64];
  std::string line = std::to_string(record.epoch) + "," + std::to_string(record.step) + ",";
  std::snprintf(buf, sizeof(buf), "%.17g", record.learning_rate);
  line += buf;
  line += "," + std::to_string(record.batch_size) + "," + (record.report.has_mask ? "1" : "0");
  for (const auto& entry : record.report.record()) {
    std::snprintf(buf, sizeof(buf), ",%.17g", entry.second);
    line += buf;
  }
  return line;
}

std::ofstream open_log(const fs::path& path, bool append) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  return out;
}

}  // namespace

TrainResult train(const PipelineConfig& config, const VideoDataset& dataset,
                  const TrainOptions& options) {
  config.validate();
  if (dataset.size() == 0) throw std::invalid_argument("train: dataset has no usable clips");
  if (dataset.resolution != config.frame_resolution) {
    throw ConfigError("train: dataset resolution " + std::to_string(dataset.resolution) +
                      " differs from model.frame_resolution " +
                      std::to_string(config.frame_resolution));
  }
  fs::create_directories(options.out_dir);
  TrainState state(config);
  state.diagnostics_dir = options.out_dir / "nan_dump";
  const bool resuming = !options.resume.empty();
  if (resuming) state.restore(options.resume);

  const fs::path log_path = options.out_dir / "train_log.jsonl";
  const fs::path csv_path = options.out_dir / "train_log.csv";
  const bool csv_exists = resuming && fs::exists(csv_path);
  std::ofstream log = open_log(log_path, resuming);
  std::ofstream csv = open_log(csv_path, resuming);
  std::ofstream timing = open_log(options.out_dir / "timing.jsonl", resuming);
  bool wrote_header = csv_exists;

  TrainResult result;
  char name[32];
  for (; state.epoch < config.epochs; ++state.epoch) {
    const std::vector<std::size_t> order =
        plan_epoch(dataset.size(), config.pairs_per_video, state.data_rng);
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      std::vector<Tensor> sources;
      std::vector<Tensor> drivings;
      for (std::size_t k = begin; k < end; ++k) {
        TrainingPair pair = sample_pair_from_clip(dataset, order[k], state.data_rng);
        sources.push_back(pair.source.tensor());
        drivings.push_back(pair.driving.tensor());
      }
      TrainBatchRecord record = train_step(state, stack(sources), stack(drivings));
      if (!wrote_header) {
        csv << csv_header(record) << '\n';
        wrote_header = true;
      }
      log << log_line(record) << '\n';
      csv << csv_row(record) << '\n';
      timing << nlohmann::json{{"step", record.step}, {"seconds", record.seconds}}.dump() << '\n';
      if (options.on_step) options.on_step(record);
      result.records.push_back(std::move(record));
    }
    log.flush();
    csv.flush();
    timing.flush();
    std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", state.epoch + 1);
    const int completed = state.epoch + 1;
    CheckpointInfo info = state.checkpoint_info();
    info.epoch = completed;
    save_checkpoint(options.out_dir / name, state.models, &state.optimizer, config, info);
    result.checkpoints.push_back(options.out_dir / name);
  }
  result.info = state.checkpoint_info();
  save_checkpoint(options.out_dir / "final.ckpt", state.models, &state.optimizer, config, result.info);
  result.checkpoints.push_back(options.out_dir / "final.ckpt");
  return result;
}

}  // namespace maskanim
