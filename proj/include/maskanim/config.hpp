#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace maskanim {

struct PerturbationConfig {
  int strip_count = 6;
  double strip_scale_min = 0.75;
  double strip_scale_max = 1.25;
  double global_scale_min = 0.75;
  double global_scale_max = 1.25;
  double poisson_lambda = 20.0;
  /// Poisson counts are multiplied by this before being added to a mask.
  double noise_scale = 1.0 / 255.0;
  /// Linear size of test-time content after shrinking (0.75 = "scaled down by 25%").
  double shrink_factor = 0.75;
  double brightness_min = 0.9;
  double brightness_max = 1.1;
  double contrast_min = 0.9;
  double contrast_max = 1.1;
  double saturation_min = 0.9;
  double saturation_max = 1.1;
  double hue_min = -0.1;
  double hue_max = 0.1;
};

/// Every hyper-parameter of the pipeline. Defaults are the full-scale values.
struct PipelineConfig {
  // model
  int frame_resolution = 256;
  int mask_resolution = 64;
  int base_channels = 64;
  int max_channels = 512;
  int encoder_depth = 5;

  // loss
  double lambda_mask = 100.0;
  double lambda_reconstruct = 10.0;
  /// Image resolutions of the multi-scale reconstruction loss; empty means
  /// {frame, frame/2, frame/4}.
  std::vector<int> reconstruct_scales;
  /// auto | pyramid | identity | vgg19. `auto` picks vgg19 when weights are set.
  std::string feature_extractor = "auto";
  std::string vgg_weights;
  std::vector<std::string> vgg_layers{"relu1_1", "relu3_1", "relu5_1"};
  /// Stop the coarse-branch reconstruction gradient at the mask generator.
  bool freeze_mask_on_coarse = false;

  // optimizer and schedule
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double adam_eps = 1e-8;
  int batch_size = 16;
  int epochs = 100;
  std::vector<int> lr_decay_epochs{60, 90};
  double lr_decay_factor = 0.1;
  int refinement_start_epoch = 1;
  /// Sampled pairs per video in one epoch.
  int pairs_per_video = 1;
  std::uint64_t seed = 0;
  /// OpenMP threads; 0 keeps the runtime default.
  int workers = 0;

  // evaluation
  int ssim_window = 11;
  double ssim_sigma = 1.5;
  std::string detector = "toy";
  std::string embedder = "toy";

  PerturbationConfig perturbation;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  [[nodiscard]] std::vector<int> effective_reconstruct_scales() const;
  [[nodiscard]] std::uint64_t data_seed() const;
  [[nodiscard]] std::uint64_t perturbation_seed() const;
  [[nodiscard]] std::uint64_t init_seed() const;

  /// Hash of the fields that determine network shapes.
  [[nodiscard]] std::string fingerprint() const;

  /// `section.key = value` assignment; throws ConfigError for unknown keys or
  /// unparsable values.
  void set(const std::string& dotted_key, const std::string& value);
  /// Applies a `section.key=value` override string.
  void apply_override(const std::string& assignment);

  /// INI text with one section per group; `from_ini_text(to_ini())` round-trips.
  [[nodiscard]] std::string to_ini() const;
  static PipelineConfig from_ini_text(const std::string& text);
  static PipelineConfig load(const std::filesystem::path& path);

  /// Desk-scale configuration: 64^2 frames, 16^2 masks, 8 base channels.
  static PipelineConfig toy();
};

}  // namespace maskanim
