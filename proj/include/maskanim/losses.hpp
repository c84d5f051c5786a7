#pragma once

// Mask loss, multi-scale perceptual reconstruction loss and the weighted
// objective.
//
// Feature extractors map a batch of RGB images (N, 3, H, W) to an ordered list
// of feature maps, one per configured layer. Three are provided:
//   identity  one layer, the image itself
//   pyramid   the image, its 2x average pool and its 4x average pool
//   vgg19     ReLU activations of a VGG-19 whose weights are loaded from a
//             tensor archive (torchvision parameter names, features.N.weight)

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "maskanim/autograd.hpp"
#include "maskanim/config.hpp"
#include "maskanim/core.hpp"

namespace maskanim {

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  [[nodiscard]] virtual std::vector<ag::Var> features(const ag::Var& images) const = 0;
  [[nodiscard]] virtual const std::vector<std::string>& layer_names() const = 0;
  [[nodiscard]] std::size_t layer_count() const { return layer_names().size(); }
};

class IdentityExtractor final : public FeatureExtractor {
 public:
  [[nodiscard]] std::vector<ag::Var> features(const ag::Var& images) const override;
  [[nodiscard]] const std::vector<std::string>& layer_names() const override { return names_; }

 private:
  std::vector<std::string> names_{"identity"};
};

class PyramidExtractor final : public FeatureExtractor {
 public:
  [[nodiscard]] std::vector<ag::Var> features(const ag::Var& images) const override;
  [[nodiscard]] const std::vector<std::string>& layer_names() const override { return names_; }

 private:
  std::vector<std::string> names_{"pool1", "pool2", "pool4"};
};

class Vgg19Extractor final : public FeatureExtractor {
 public:
  /// `layers` are names like "relu3_1". Throws ConfigError for unknown layer
  /// names and IoError for unreadable or incomplete weight files.
  Vgg19Extractor(const std::filesystem::path& weights, std::vector<std::string> layers);

  [[nodiscard]] std::vector<ag::Var> features(const ag::Var& images) const override;
  [[nodiscard]] const std::vector<std::string>& layer_names() const override { return names_; }

 private:
  struct Conv {
    ag::Var weight;
    ag::Var bias;
    bool pool_before = false;
    std::string relu_name;
  };
  std::vector<std::string> names_;
  std::vector<Conv> convs_;
};

/// Resolves `feature_extractor` and `vgg_weights`: "auto" means vgg19 when a
/// weights path is set, else pyramid.
[[nodiscard]] std::unique_ptr<FeatureExtractor> make_feature_extractor(const PipelineConfig& config);

/// Mean absolute difference; throws std::invalid_argument on shape mismatch.
[[nodiscard]] ag::Var mask_loss(const ag::Var& m_d, const ag::Var& target);
[[nodiscard]] double mask_loss(const Mask& m_d, const Mask& target);

/// Mean |N_j(a) - N_j(b)|; throws std::invalid_argument when j is out of range
/// or the shapes differ.
[[nodiscard]] ag::Var perceptual_layer_loss(const FeatureExtractor& extractor, const ag::Var& a,
                                            const ag::Var& b, std::size_t j);
[[nodiscard]] double perceptual_layer_loss(const FeatureExtractor& extractor, const Frame& a,
                                           const Frame& b, std::size_t j);

enum class Branch { coarse, fine };

struct LossTerm {
  int scale = 0;
  std::string layer;
  Branch branch = Branch::coarse;
  double value = 0.0;
};

struct ReconstructionLoss {
  ag::Var coarse;  // sum of the c-branch terms
  ag::Var fine;    // sum of the f-branch terms
  std::vector<LossTerm> breakdown;
  [[nodiscard]] double total() const;
};

/// Which branches of the reconstruction loss to evaluate.
struct BranchSelection {
  bool coarse = true;
  bool fine = true;
};

/// Sum over scales and layers of L_VGG(c_s, d_s) + L_VGG(f_s, d_s), where x_s is
/// x resized to s x s. Branches that are not selected are left undefined and
/// contribute no breakdown entries.
[[nodiscard]] ReconstructionLoss reconstruction_loss(const FeatureExtractor& extractor,
                                                     const ag::Var& c, const ag::Var& f,
                                                     const ag::Var& d,
                                                     const std::vector<int>& scales,
                                                     BranchSelection branches = {});

/// lambda_mask * mask + lambda_reconstruct * reconstruct. Throws
/// std::invalid_argument for negative weights.
[[nodiscard]] double combined_loss(double mask, double reconstruct, double lambda_mask,
                                   double lambda_reconstruct);

struct LossReport {
  bool has_mask = false;
  double mask_loss = 0.0;
  double reconstruct_loss = 0.0;
  double total = 0.0;
  std::vector<LossTerm> breakdown;

  /// Flat key -> value record: mask_loss, reconstruct_loss, total and
  /// `recon/<branch>/<scale>/<layer>` entries.
  [[nodiscard]] std::map<std::string, double> record() const;
};

[[nodiscard]] const char* branch_name(Branch b);

}  // namespace maskanim
