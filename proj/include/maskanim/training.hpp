#pragma once

// Training step (for a batch of same-video pairs (s, d)):
//   m_s    = D(M(s))
//   d'     = A(d)                      color jitter
//   target = D(M(d'))
//   m_d    = R(D(s), m_s, P_train(target))      from refinement_start_epoch on
//   c      = L(D(s), m_s, target)
//   f      = H(s, U(m_s), U(target), c)
//   loss   = lambda_mask * |m_d - target| + lambda_reconstruct * (rec(c, d) + rec(f, d))
//
// Gradient routing: the mask term reaches only R (its inputs and target are
// detached), the f-branch reaches only H (all of H's inputs are detached), the
// c-branch reaches L and M (M is cut off when freeze_mask_on_coarse is set).
// Adam steps only the parameters that received a gradient.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "maskanim/checkpoint.hpp"
#include "maskanim/config.hpp"
#include "maskanim/data.hpp"
#include "maskanim/losses.hpp"
#include "maskanim/networks.hpp"
#include "maskanim/optimizer.hpp"
#include "maskanim/random.hpp"

namespace maskanim {

/// Base learning rate times decay_factor for every milestone <= epoch.
/// Throws std::invalid_argument unless 0 <= epoch < epochs.
[[nodiscard]] double lr_schedule(int epoch, const PipelineConfig& config);

struct TrainState {
  explicit TrainState(const PipelineConfig& config);

  PipelineConfig config;
  ModelBundle models;
  Adam optimizer;
  std::unique_ptr<FeatureExtractor> extractor;
  int epoch = 0;
  std::int64_t global_step = 0;
  RandomStream data_rng;
  RandomStream perturbation_rng;
  /// Where a diverging step writes its inputs; empty disables the dump.
  std::filesystem::path diagnostics_dir;

  [[nodiscard]] CheckpointInfo checkpoint_info() const;
  /// Restores weights, optimizer, counters and random streams. The stored
  /// fingerprint must match `config` (ConfigError otherwise).
  void restore(const std::filesystem::path& checkpoint);
};

/// Loss terms a step may use; a disabled term is neither computed nor
/// back-propagated.
struct TermSelection {
  bool mask = true;
  bool coarse = true;
  bool fine = true;
};

struct TrainBatchRecord {
  int epoch = 0;
  std::int64_t step = 0;
  double learning_rate = 0.0;
  int batch_size = 0;
  LossReport report;
  double seconds = 0.0;
};

/// One optimization step on stacked batches (N, 3, F, F) of source and
/// driving frames. Increments global_step. Throws TrainingDivergedError on a
/// non-finite loss after dumping the batch to diagnostics_dir.
TrainBatchRecord train_step(TrainState& state, const Tensor& sources, const Tensor& drivings,
                            TermSelection terms = {});

/// Clip indices for one epoch: each clip `pairs_per_video` times, shuffled.
[[nodiscard]] std::vector<std::size_t> plan_epoch(std::size_t clips, int pairs_per_video,
                                                  RandomStream& rng);

struct TrainOptions {
  std::filesystem::path out_dir;
  /// Checkpoint to continue from; its epoch count is the first epoch run.
  std::filesystem::path resume;
  std::function<void(const TrainBatchRecord&)> on_step;
};

struct TrainResult {
  CheckpointInfo info;
  std::vector<std::filesystem::path> checkpoints;
  std::vector<TrainBatchRecord> records;
};

/// Runs the remaining epochs. Writes epoch_NNN.ckpt after each epoch and
/// final.ckpt at the end, one JSON line per step to train_log.jsonl (and a
/// CSV twin), and per-step wall time to timing.jsonl.
TrainResult train(const PipelineConfig& config, const VideoDataset& dataset,
                  const TrainOptions& options);

/// The JSON line written for a record.
[[nodiscard]] std::string log_line(const TrainBatchRecord& record);

}  // namespace maskanim
