#include "maskanim/losses.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

#include "maskanim/archive.hpp"
#include "maskanim/errors.hpp"

namespace maskanim {

std::vector<ag::Var> IdentityExtractor::features(const ag::Var& images) const { return {images}; }

std::vector<ag::Var> PyramidExtractor::features(const ag::Var& images) const {
  ag::Var half = ag::avg_pool2(images);
  ag::Var quarter = ag::avg_pool2(half);
  return {images, half, quarter};
}

namespace {

// Output channels per convolution; 0 marks a 2x2 max pool.
constexpr std::array<int, 21> kVggPlan{64,  64,  0,   128, 128, 0,   256, 256, 256, 256, 0,
                                       512, 512, 512, 512, 0,   512, 512, 512, 512, 0};

constexpr std::array<float, 3> kImageNetMean{0.485f, 0.456f, 0.406f};
constexpr std::array<float, 3> kImageNetStd{0.229f, 0.224f, 0.225f};

}  // namespace

Vgg19Extractor::Vgg19Extractor(const std::filesystem::path& weights, std::vector<std::string> layers)
    : names_(std::move(layers)) {
  if (names_.empty()) throw ConfigError("vgg19: at least one layer is required");
  // Enumerate every ReLU in torchvision order and find the deepest one requested.
  struct Entry {
    int index;  // torchvision features.N index of the convolution
    int in_channels;
    int out_channels;
    bool pool_before;
    std::string relu;
  };
  std::vector<Entry> all;
  int index = 0;
  int stage = 1;
  int within = 0;
  int channels = 3;
  bool pending_pool = false;
  for (int out : kVggPlan) {
    if (out == 0) {
      pending_pool = true;
      ++stage;
      within = 0;
      ++index;
      continue;
    }
    ++within;
    all.push_back({index, channels, out, pending_pool,
                   "relu" + std::to_string(stage) + "_" + std::to_string(within)});
    pending_pool = false;
    channels = out;
    index += 2;
  }
  std::size_t deepest = 0;
  for (const std::string& name : names_) {
    const auto it = std::find_if(all.begin(), all.end(), [&](const Entry& e) { return e.relu == name; });
    if (it == all.end()) throw ConfigError("vgg19: unknown layer '" + name + "'");
    deepest = std::max(deepest, static_cast<std::size_t>(it - all.begin()) + 1);
  }

  const TensorArchive archive = read_archive(weights);
  for (std::size_t i = 0; i < deepest; ++i) {
    const Entry& e = all[i];
    const std::string prefix = "features." + std::to_string(e.index);
    const Tensor& w = archive.get(prefix + ".weight");
    const Tensor& b = archive.get(prefix + ".bias");
    if (w.shape() != Shape{e.out_channels, e.in_channels, 3, 3}) {
      throw IoError(weights.string() + ": " + prefix + ".weight has shape " + w.shape().str());
    }
    Tensor bias = b.reshaped(Shape{1, e.out_channels, 1, 1});
    convs_.push_back({ag::Var::leaf(w), ag::Var::leaf(std::move(bias)), e.pool_before, e.relu});
  }
}

std::vector<ag::Var> Vgg19Extractor::features(const ag::Var& images) const {
  std::vector<float> scale(3);
  std::vector<float> shift(3);
  for (int c = 0; c < 3; ++c) {
    scale[c] = 1.0f / kImageNetStd[c];
    shift[c] = -kImageNetMean[c] / kImageNetStd[c];
  }
  ag::Var h = ag::channel_affine(images, scale, shift);
  std::vector<ag::Var> taps(names_.size());
  for (const Conv& conv : convs_) {
    if (conv.pool_before) h = ag::max_pool2(h);
    h = ag::relu(ag::conv2d(h, conv.weight, conv.bias));
    for (std::size_t j = 0; j < names_.size(); ++j) {
      if (names_[j] == conv.relu_name) taps[j] = h;
    }
  }
  return taps;
}

std::unique_ptr<FeatureExtractor> make_feature_extractor(const PipelineConfig& config) {
  std::string kind = config.feature_extractor;
  if (kind == "auto") kind = config.vgg_weights.empty() ? "pyramid" : "vgg19";
  if (kind == "identity") return std::make_unique<IdentityExtractor>();
  if (kind == "pyramid") return std::make_unique<PyramidExtractor>();
  if (kind == "vgg19") {
    if (config.vgg_weights.empty()) throw ConfigError("loss.vgg_weights is required for vgg19");
    return std::make_unique<Vgg19Extractor>(config.vgg_weights, config.vgg_layers);
  }
  throw ConfigError("unknown feature extractor '" + kind + "'");
}

ag::Var mask_loss(const ag::Var& m_d, const ag::Var& target) {
  if (m_d.shape() != target.shape()) {
    throw std::invalid_argument("mask_loss: shape mismatch " + m_d.shape().str() + " vs " +
                                target.shape().str());
  }
  return ag::mean_abs_diff(m_d, target);
}

double mask_loss(const Mask& m_d, const Mask& target) {
  ag::NoGradGuard guard;
  return mask_loss(ag::Var::leaf(m_d.tensor()), ag::Var::leaf(target.tensor())).item();
}

ag::Var perceptual_layer_loss(const FeatureExtractor& extractor, const ag::Var& a, const ag::Var& b,
                              std::size_t j) {
  if (j >= extractor.layer_count()) {
    throw std::invalid_argument("perceptual_layer_loss: layer " + std::to_string(j) +
                                " out of range (" + std::to_string(extractor.layer_count()) +
                                " layers)");
  }
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("perceptual_layer_loss: shape mismatch " + a.shape().str() +
                                " vs " + b.shape().str());
  }
  return ag::mean_abs_diff(extractor.features(a)[j], extractor.features(b)[j]);
}

double perceptual_layer_loss(const FeatureExtractor& extractor, const Frame& a, const Frame& b,
                             std::size_t j) {
  ag::NoGradGuard guard;
  return perceptual_layer_loss(extractor, ag::Var::leaf(a.tensor()), ag::Var::leaf(b.tensor()), j)
      .item();
}

double ReconstructionLoss::total() const {
  double sum = 0.0;
  if (coarse.defined()) sum += coarse.item();
  if (fine.defined()) sum += fine.item();
  return sum;
}

namespace {

ag::Var at_scale(const ag::Var& x, int s) {
  if (x.shape().h == s && x.shape().w == s) return x;
  return ag::resize(x, s, s);
}

}  // namespace

ReconstructionLoss reconstruction_loss(const FeatureExtractor& extractor, const ag::Var& c,
                                       const ag::Var& f, const ag::Var& d,
                                       const std::vector<int>& scales, BranchSelection branches) {
  if ((branches.coarse && c.shape() != d.shape()) || (branches.fine && f.shape() != d.shape())) {
    throw std::invalid_argument("reconstruction_loss: c, f and d must share one shape");
  }
  ReconstructionLoss out;
  std::vector<std::pair<double, ag::Var>> coarse_terms;
  std::vector<std::pair<double, ag::Var>> fine_terms;
  const std::vector<std::string>& layers = extractor.layer_names();
  for (int s : scales) {
    std::vector<ag::Var> target;
    {
      ag::NoGradGuard guard;
      target = extractor.features(at_scale(d, s));
    }
    const auto add_branch = [&](const ag::Var& x, Branch branch, auto& terms) {
      const std::vector<ag::Var> feats = extractor.features(at_scale(x, s));
      for (std::size_t j = 0; j < layers.size(); ++j) {
        ag::Var term = ag::mean_abs_diff(feats[j], target[j]);
        out.breakdown.push_back({s, layers[j], branch, term.item()});
        terms.emplace_back(1.0, term);
      }
    };
    if (branches.coarse) add_branch(c, Branch::coarse, coarse_terms);
    if (branches.fine) add_branch(f, Branch::fine, fine_terms);
  }
  if (branches.coarse) out.coarse = ag::weighted_sum(coarse_terms);
  if (branches.fine) out.fine = ag::weighted_sum(fine_terms);
  return out;
}

double combined_loss(double mask, double reconstruct, double lambda_mask,
                     double lambda_reconstruct) {
  if (lambda_mask < 0.0 || lambda_reconstruct < 0.0) {
    throw std::invalid_argument("combined_loss: weights must be nonnegative");
  }
  return lambda_mask * mask + lambda_reconstruct * reconstruct;
}

const char* branch_name(Branch b) { return b == Branch::coarse ? "c" : "f"; }

std::map<std::string, double> LossReport::record() const {
  std::map<std::string, double> out;
  out["mask_loss"] = mask_loss;
  out["reconstruct_loss"] = reconstruct_loss;
  out["total"] = total;
  for (const LossTerm& t : breakdown) {
    out["recon/" + std::string(branch_name(t.branch)) + "/" + std::to_string(t.scale) + "/" +
        t.layer] = t.value;
  }
  return out;
}

}  // namespace maskanim
