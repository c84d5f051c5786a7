#pragma once

// The four networks of the animation pipeline and their forward contracts.
//
//   M  mask generator       frame (3)                          -> mask (1)
//   R  mask refinement      D(s) (3), m_s (1), driver mask (1) -> refined mask (1)
//   L  low-res generator    D(s) (3), m_s (1), driver mask (1) -> coarse frame (3), 4x larger
//   H  high-res generator   s (3), U(m_s) (1), U(driver) (1), c (3) -> final frame (3)
//
// M, R and H share one encoder-decoder layout:
//   encode block: conv3x3 - relu - batchnorm - avgpool2x2
//   decode block: upsample2x2 - conv3x3 - batchnorm - relu
//   head:         conv7x7 - sigmoid
// H additionally concatenates each encoder stage's input onto the output of
// the decode block at the same resolution (U-Net skips).
//
// L is conv7x7 - batchnorm - relu, six pre-activation residual blocks
// (batchnorm - relu - conv3x3 - batchnorm - relu - conv3x3, plus identity),
// two decode blocks and a conv7x7 - sigmoid head.
//
// Channel plan: encoder stage i has min(base << i, max) channels; decode
// blocks mirror it. L runs at min(4 * base, max) channels and halves them in
// each decode block.

#include <cstdint>
#include <string>
#include <vector>

#include "maskanim/config.hpp"
#include "maskanim/core.hpp"
#include "maskanim/layers.hpp"

namespace maskanim {

struct NetworkSpec {
  int in_channels = 3;
  int out_channels = 1;
  int base_channels = 64;
  int max_channels = 512;
  int depth = 5;
  bool skip_connections = false;
  /// Spatial size the network accepts.
  int resolution = 256;

  /// Throws ConfigError for non-positive sizes or a resolution that the
  /// encoder cannot halve `depth` times.
  void validate() const;
};

class EncoderDecoder {
 public:
  EncoderDecoder(const NetworkSpec& spec, RandomStream& rng);

  /// x: (N, in_channels, resolution, resolution) -> (N, out_channels, resolution, resolution).
  /// `zero_bottleneck` replaces the deepest latent by zeros (skips still flow).
  [[nodiscard]] ag::Var forward(const ag::Var& x, bool training, bool zero_bottleneck = false);

  void collect(const std::string& prefix, nn::Registry& out);
  [[nodiscard]] const NetworkSpec& spec() const { return spec_; }
  [[nodiscard]] int encode_block_count() const { return static_cast<int>(encoders_.size()); }
  [[nodiscard]] int decode_block_count() const { return static_cast<int>(decoders_.size()); }

 private:
  struct Block {
    nn::Conv2d conv;
    nn::BatchNorm2d norm;
  };
  NetworkSpec spec_;
  std::vector<Block> encoders_;
  std::vector<Block> decoders_;  // decoders_[k] restores resolution / 2^k
  nn::Conv2d head_;
};

class LowResGenerator {
 public:
  static constexpr int kResidualBlocks = 6;
  static constexpr int kDecodeBlocks = 2;

  LowResGenerator(int in_channels, int base_channels, int max_channels, int resolution,
                  RandomStream& rng);

  /// x: (N, in_channels, r, r) -> (N, 3, 4r, 4r).
  [[nodiscard]] ag::Var forward(const ag::Var& x, bool training);

  void collect(const std::string& prefix, nn::Registry& out);
  [[nodiscard]] int residual_block_count() const { return static_cast<int>(residual_.size()); }
  [[nodiscard]] int decode_block_count() const { return static_cast<int>(decoders_.size()); }
  [[nodiscard]] int input_resolution() const { return resolution_; }

 private:
  struct Residual {
    nn::BatchNorm2d norm1;
    nn::Conv2d conv1;
    nn::BatchNorm2d norm2;
    nn::Conv2d conv2;
  };
  struct Block {
    nn::Conv2d conv;
    nn::BatchNorm2d norm;
  };
  int resolution_;
  nn::Conv2d stem_;
  nn::BatchNorm2d stem_norm_;
  std::vector<Residual> residual_;
  std::vector<Block> decoders_;
  nn::Conv2d head_;
};

/// The four networks built from one configuration. Move-only: parameters are
/// shared handles, so copies would alias.
class ModelBundle {
 public:
  explicit ModelBundle(const PipelineConfig& config);
  ModelBundle(const ModelBundle&) = delete;
  ModelBundle& operator=(const ModelBundle&) = delete;
  ModelBundle(ModelBundle&&) = default;
  ModelBundle& operator=(ModelBundle&&) = default;

  EncoderDecoder mask_generator;    // M
  EncoderDecoder refinement;        // R
  LowResGenerator lowres_generator; // L
  EncoderDecoder highres_generator; // H

  [[nodiscard]] const PipelineConfig& config() const { return config_; }
  [[nodiscard]] int frame_resolution() const { return config_.frame_resolution; }
  [[nodiscard]] int mask_resolution() const { return config_.mask_resolution; }

  /// Parameters and buffers of one network ("M", "R", "L" or "H"), names
  /// prefixed with the network letter.
  [[nodiscard]] nn::Registry registry(const std::string& network);
  /// All four networks in M, R, L, H order.
  [[nodiscard]] nn::Registry registry();
  [[nodiscard]] std::size_t parameter_count(const std::string& network);
  /// Hash over the raw bytes of a network's trainable parameters.
  [[nodiscard]] std::uint64_t parameter_hash(const std::string& network);

  // Single-sample evaluation-mode forwards (no graph is recorded).
  [[nodiscard]] Mask mask(const Frame& frame);
  [[nodiscard]] Mask refine(const Frame& source_small, const Mask& source_mask, const Mask& perturbed);
  [[nodiscard]] Frame coarse(const Frame& source_small, const Mask& source_mask, const Mask& pose_mask);
  [[nodiscard]] Frame fine(const Frame& source, const Mask& source_mask_up, const Mask& pose_mask_up,
                           const Frame& coarse);

 private:
  ModelBundle(const PipelineConfig& config, RandomStream&& rng);

  PipelineConfig config_;
};

inline const std::vector<std::string> kNetworkNames{"M", "R", "L", "H"};

// Batched forward contracts. Every input is checked against the bundle's
// resolutions; mismatches throw std::invalid_argument.

/// D(M(frames)): (N,3,F,F) -> (N,1,F/4,F/4).
[[nodiscard]] ag::Var mask_forward(ModelBundle& models, const ag::Var& frames, bool training);
/// R(D(s), m_s, perturbed), concatenated in that order.
[[nodiscard]] ag::Var refine_forward(ModelBundle& models, const ag::Var& source_small,
                                     const ag::Var& source_mask, const ag::Var& perturbed,
                                     bool training);
/// L(D(s), m_s, pose_mask) at full frame resolution.
[[nodiscard]] ag::Var lowres_forward(ModelBundle& models, const ag::Var& source_small,
                                     const ag::Var& source_mask, const ag::Var& pose_mask,
                                     bool training);
/// H(s, U(m_s), U(pose_mask), c), concatenated in that order.
[[nodiscard]] ag::Var highres_forward(ModelBundle& models, const ag::Var& source,
                                      const ag::Var& source_mask_up, const ag::Var& pose_mask_up,
                                      const ag::Var& coarse, bool training);

}  // namespace maskanim
