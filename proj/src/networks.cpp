#include "maskanim/networks.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

#include "maskanim/errors.hpp"

namespace maskanim {

namespace {

int stage_channels(int base, int max, int stage) { return std::min(max, base << stage); }

void check_input(const ag::Var& x, int channels, int resolution, const char* what) {
  const Shape s = x.shape();
  if (s.c != channels || s.h != resolution || s.w != resolution) {
    throw std::invalid_argument(std::string(what) + ": expected (N," + std::to_string(channels) +
                                "," + std::to_string(resolution) + "," +
                                std::to_string(resolution) + "), got " + s.str());
  }
}

ag::Var upsample2(const ag::Var& x) { return ag::resize(x, x.shape().h * 2, x.shape().w * 2); }

}  // namespace

void NetworkSpec::validate() const {
  if (in_channels < 1 || out_channels < 1 || base_channels < 1 || max_channels < base_channels ||
      depth < 1 || resolution < 1) {
    throw ConfigError("network spec: channel counts, depth and resolution must be positive");
  }
  if (resolution % (1 << depth) != 0) {
    throw ConfigError("network spec: resolution " + std::to_string(resolution) +
                      " cannot be halved " + std::to_string(depth) + " times");
  }
}

EncoderDecoder::EncoderDecoder(const NetworkSpec& spec, RandomStream& rng)
    : spec_((spec.validate(), spec)) {
  // Channels of e_k, the input to encoder stage k (e_0 is the network input).
  std::vector<int> feature(static_cast<std::size_t>(spec.depth) + 1);
  feature[0] = spec.in_channels;
  for (int i = 0; i < spec.depth; ++i) {
    const int out = stage_channels(spec.base_channels, spec.max_channels, i);
    encoders_.push_back({nn::Conv2d(feature[static_cast<std::size_t>(i)], out, 3, rng),
                         nn::BatchNorm2d(out)});
    feature[static_cast<std::size_t>(i) + 1] = out;
  }
  decoders_.reserve(static_cast<std::size_t>(spec.depth));
  std::vector<Block> reversed;
  int channels = feature.back();
  for (int k = spec.depth - 1; k >= 0; --k) {
    const int out = stage_channels(spec.base_channels, spec.max_channels, std::max(k - 1, 0));
    reversed.push_back({nn::Conv2d(channels, out, 3, rng), nn::BatchNorm2d(out)});
    channels = out + (spec.skip_connections ? feature[static_cast<std::size_t>(k)] : 0);
  }
  for (auto it = reversed.rbegin(); it != reversed.rend(); ++it) decoders_.push_back(std::move(*it));
  head_ = nn::Conv2d(channels, spec.out_channels, 7, rng);
}

ag::Var EncoderDecoder::forward(const ag::Var& x, bool training, bool zero_bottleneck) {
  check_input(x, spec_.in_channels, spec_.resolution, "encoder-decoder");
  std::vector<ag::Var> features{x};
  ag::Var h = x;
  for (Block& block : encoders_) {
    h = ag::avg_pool2(block.norm.forward(ag::relu(block.conv.forward(h)), training));
    features.push_back(h);
  }
  if (zero_bottleneck) h = ag::Var::leaf(Tensor(h.shape(), 0.0f));
  for (int k = spec_.depth - 1; k >= 0; --k) {
    Block& block = decoders_[static_cast<std::size_t>(k)];
    h = ag::relu(block.norm.forward(block.conv.forward(upsample2(h)), training));
    if (spec_.skip_connections) {
      const std::array<ag::Var, 2> parts{h, features[static_cast<std::size_t>(k)]};
      h = ag::concat_channels(parts);
    }
  }
  return ag::sigmoid(head_.forward(h));
}

void EncoderDecoder::collect(const std::string& prefix, nn::Registry& out) {
  for (std::size_t i = 0; i < encoders_.size(); ++i) {
    encoders_[i].conv.collect(prefix + ".enc" + std::to_string(i) + ".conv", out);
    encoders_[i].norm.collect(prefix + ".enc" + std::to_string(i) + ".norm", out);
  }
  for (std::size_t i = 0; i < decoders_.size(); ++i) {
    decoders_[i].conv.collect(prefix + ".dec" + std::to_string(i) + ".conv", out);
    decoders_[i].norm.collect(prefix + ".dec" + std::to_string(i) + ".norm", out);
  }
  head_.collect(prefix + ".head", out);
}

LowResGenerator::LowResGenerator(int in_channels, int base_channels, int max_channels,
                                 int resolution, RandomStream& rng)
    : resolution_(resolution),
      stem_(in_channels, std::min(max_channels, 4 * base_channels), 7, rng),
      stem_norm_(std::min(max_channels, 4 * base_channels)) {
  const int width = std::min(max_channels, 4 * base_channels);
  for (int i = 0; i < kResidualBlocks; ++i) {
    residual_.push_back({nn::BatchNorm2d(width), nn::Conv2d(width, width, 3, rng),
                         nn::BatchNorm2d(width), nn::Conv2d(width, width, 3, rng)});
  }
  int channels = width;
  for (int i = 0; i < kDecodeBlocks; ++i) {
    const int out = std::max(1, channels / 2);
    decoders_.push_back({nn::Conv2d(channels, out, 3, rng), nn::BatchNorm2d(out)});
    channels = out;
  }
  head_ = nn::Conv2d(channels, 3, 7, rng);
}

ag::Var LowResGenerator::forward(const ag::Var& x, bool training) {
  check_input(x, stem_.in_channels(), resolution_, "low-res generator");
  ag::Var h = ag::relu(stem_norm_.forward(stem_.forward(x), training));
  for (Residual& block : residual_) {
    ag::Var r = block.conv1.forward(ag::relu(block.norm1.forward(h, training)));
    r = block.conv2.forward(ag::relu(block.norm2.forward(r, training)));
    h = ag::add(h, r);
  }
  for (Block& block : decoders_) {
    h = ag::relu(block.norm.forward(block.conv.forward(upsample2(h)), training));
  }
  return ag::sigmoid(head_.forward(h));
}

void LowResGenerator::collect(const std::string& prefix, nn::Registry& out) {
  stem_.collect(prefix + ".stem.conv", out);
  stem_norm_.collect(prefix + ".stem.norm", out);
  for (std::size_t i = 0; i < residual_.size(); ++i) {
    const std::string p = prefix + ".res" + std::to_string(i);
    residual_[i].norm1.collect(p + ".norm1", out);
    residual_[i].conv1.collect(p + ".conv1", out);
    residual_[i].norm2.collect(p + ".norm2", out);
    residual_[i].conv2.collect(p + ".conv2", out);
  }
  for (std::size_t i = 0; i < decoders_.size(); ++i) {
    decoders_[i].conv.collect(prefix + ".dec" + std::to_string(i) + ".conv", out);
    decoders_[i].norm.collect(prefix + ".dec" + std::to_string(i) + ".norm", out);
  }
  head_.collect(prefix + ".head", out);
}

namespace {

NetworkSpec make_spec(const PipelineConfig& c, int in, int out, bool skips, int resolution) {
  NetworkSpec s;
  s.in_channels = in;
  s.out_channels = out;
  s.base_channels = c.base_channels;
  s.max_channels = c.max_channels;
  s.depth = c.encoder_depth;
  s.skip_connections = skips;
  s.resolution = resolution;
  return s;
}

}  // namespace

ModelBundle::ModelBundle(const PipelineConfig& config)
    : ModelBundle((config.validate(), config), RandomStream(config.init_seed())) {}

ModelBundle::ModelBundle(const PipelineConfig& config, RandomStream&& rng)
    : mask_generator(make_spec(config, 3, 1, false, config.frame_resolution), rng),
      refinement(make_spec(config, 5, 1, false, config.mask_resolution), rng),
      lowres_generator(5, config.base_channels, config.max_channels, config.mask_resolution, rng),
      highres_generator(make_spec(config, 8, 3, true, config.frame_resolution), rng),
      config_(config) {}

nn::Registry ModelBundle::registry(const std::string& network) {
  nn::Registry out;
  if (network == "M") {
    mask_generator.collect("M", out);
  } else if (network == "R") {
    refinement.collect("R", out);
  } else if (network == "L") {
    lowres_generator.collect("L", out);
  } else if (network == "H") {
    highres_generator.collect("H", out);
  } else {
    throw std::invalid_argument("unknown network '" + network + "'");
  }
  return out;
}

nn::Registry ModelBundle::registry() {
  nn::Registry all;
  for (const std::string& name : kNetworkNames) {
    nn::Registry part = registry(name);
    all.params.insert(all.params.end(), part.params.begin(), part.params.end());
    all.buffers.insert(all.buffers.end(), part.buffers.begin(), part.buffers.end());
  }
  return all;
}

std::size_t ModelBundle::parameter_count(const std::string& network) {
  std::size_t count = 0;
  for (const auto& p : registry(network).params) count += p.var.value().numel();
  return count;
}

std::uint64_t ModelBundle::parameter_hash(const std::string& network) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& p : registry(network).params) h = content_hash(p.var.value(), h);
  return h;
}

namespace {

ag::Var constant(const Tensor& t) { return ag::Var::leaf(t); }

}  // namespace

Mask ModelBundle::mask(const Frame& frame) {
  ag::NoGradGuard guard;
  return Mask(mask_forward(*this, constant(frame.tensor()), false).value());
}

Mask ModelBundle::refine(const Frame& source_small, const Mask& source_mask, const Mask& perturbed) {
  ag::NoGradGuard guard;
  return Mask(refine_forward(*this, constant(source_small.tensor()), constant(source_mask.tensor()),
                             constant(perturbed.tensor()), false)
                  .value());
}

Frame ModelBundle::coarse(const Frame& source_small, const Mask& source_mask, const Mask& pose_mask) {
  ag::NoGradGuard guard;
  return Frame(lowres_forward(*this, constant(source_small.tensor()), constant(source_mask.tensor()),
                              constant(pose_mask.tensor()), false)
                   .value());
}

Frame ModelBundle::fine(const Frame& source, const Mask& source_mask_up, const Mask& pose_mask_up,
                        const Frame& coarse) {
  ag::NoGradGuard guard;
  return Frame(highres_forward(*this, constant(source.tensor()), constant(source_mask_up.tensor()),
                               constant(pose_mask_up.tensor()), constant(coarse.tensor()), false)
                   .value());
}

namespace {

void check_batch(std::initializer_list<std::pair<const ag::Var*, int>> inputs, int resolution,
                 const char* what) {
  int n = -1;
  for (const auto& [var, channels] : inputs) {
    const Shape s = var->shape();
    if (s.c != channels || s.h != resolution || s.w != resolution || (n >= 0 && s.n != n)) {
      throw std::invalid_argument(std::string(what) + ": input of shape " + s.str() +
                                  " does not match (N," + std::to_string(channels) + "," +
                                  std::to_string(resolution) + "," + std::to_string(resolution) +
                                  ")");
    }
    n = s.n;
  }
}

}  // namespace

ag::Var mask_forward(ModelBundle& models, const ag::Var& frames, bool training) {
  check_batch({{&frames, 3}}, models.frame_resolution(), "mask generator");
  const int r = models.mask_resolution();
  return ag::resize(models.mask_generator.forward(frames, training), r, r);
}

ag::Var refine_forward(ModelBundle& models, const ag::Var& source_small, const ag::Var& source_mask,
                       const ag::Var& perturbed, bool training) {
  check_batch({{&source_small, 3}, {&source_mask, 1}, {&perturbed, 1}}, models.mask_resolution(),
              "refinement");
  const std::array<ag::Var, 3> parts{source_small, source_mask, perturbed};
  return models.refinement.forward(ag::concat_channels(parts), training);
}

ag::Var lowres_forward(ModelBundle& models, const ag::Var& source_small, const ag::Var& source_mask,
                       const ag::Var& pose_mask, bool training) {
  check_batch({{&source_small, 3}, {&source_mask, 1}, {&pose_mask, 1}}, models.mask_resolution(),
              "low-res generator");
  const std::array<ag::Var, 3> parts{source_small, source_mask, pose_mask};
  return models.lowres_generator.forward(ag::concat_channels(parts), training);
}

ag::Var highres_forward(ModelBundle& models, const ag::Var& source, const ag::Var& source_mask_up,
                        const ag::Var& pose_mask_up, const ag::Var& coarse, bool training) {
  check_batch({{&source, 3}, {&source_mask_up, 1}, {&pose_mask_up, 1}, {&coarse, 3}},
              models.frame_resolution(), "high-res generator");
  const std::array<ag::Var, 4> parts{source, source_mask_up, pose_mask_up, coarse};
  return models.highres_generator.forward(ag::concat_channels(parts), training);
}

}  // namespace maskanim
