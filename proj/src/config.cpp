#include "maskanim/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "maskanim/errors.hpp"
#include "maskanim/random.hpp"

namespace maskanim {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string text = trim(raw);
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + raw + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string text = trim(raw);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + raw + "'");
}

std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> items;
  std::stringstream in(raw);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ",";
    if constexpr (std::is_same_v<T, std::string>) {
      out += items[i];
    } else {
      out += std::to_string(items[i]);
    }
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename M>
Field int_field(std::string key, M member) {
  return {key,
          [key, member](PipelineConfig& c, const std::string& v) {
            std::invoke(member, c) = parse_number<std::remove_cvref_t<decltype(std::invoke(member, c))>>(key, v);
          },
          [member](const PipelineConfig& c) { return std::to_string(std::invoke(member, c)); }};
}

template <typename M>
Field double_field(std::string key, M member) {
  return {key,
          [key, member](PipelineConfig& c, const std::string& v) {
            std::invoke(member, c) = parse_number<double>(key, v);
          },
          [member](const PipelineConfig& c) { return format_double(std::invoke(member, c)); }};
}

template <typename M>
Field string_field(std::string key, M member) {
  return {key, [member](PipelineConfig& c, const std::string& v) { std::invoke(member, c) = trim(v); },
          [member](const PipelineConfig& c) { return std::invoke(member, c); }};
}

// Accessor helpers so perturbation members can share the table.
#define PERT(name) [](auto& c) -> auto& { return c.perturbation.name; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(int_field("model.frame_resolution", &PipelineConfig::frame_resolution));
    f.push_back(int_field("model.mask_resolution", &PipelineConfig::mask_resolution));
    f.push_back(int_field("model.base_channels", &PipelineConfig::base_channels));
    f.push_back(int_field("model.max_channels", &PipelineConfig::max_channels));
    f.push_back(int_field("model.encoder_depth", &PipelineConfig::encoder_depth));

    f.push_back(double_field("loss.lambda_mask", &PipelineConfig::lambda_mask));
    f.push_back(double_field("loss.lambda_reconstruct", &PipelineConfig::lambda_reconstruct));
    f.push_back({"loss.reconstruct_scales",
                 [](PipelineConfig& c, const std::string& v) {
                   c.reconstruct_scales.clear();
                   for (const auto& item : split_list(v))
                     c.reconstruct_scales.push_back(parse_number<int>("loss.reconstruct_scales", item));
                 },
                 [](const PipelineConfig& c) { return join(c.reconstruct_scales); }});
    f.push_back(string_field("loss.feature_extractor", &PipelineConfig::feature_extractor));
    f.push_back(string_field("loss.vgg_weights", &PipelineConfig::vgg_weights));
    f.push_back({"loss.vgg_layers",
                 [](PipelineConfig& c, const std::string& v) { c.vgg_layers = split_list(v); },
                 [](const PipelineConfig& c) { return join(c.vgg_layers); }});
    f.push_back({"loss.freeze_mask_on_coarse",
                 [](PipelineConfig& c, const std::string& v) {
                   c.freeze_mask_on_coarse = parse_bool("loss.freeze_mask_on_coarse", v);
                 },
                 [](const PipelineConfig& c) {
                   return std::string(c.freeze_mask_on_coarse ? "true" : "false");
                 }});

    f.push_back(double_field("optimizer.learning_rate", &PipelineConfig::learning_rate));
    f.push_back(double_field("optimizer.beta1", &PipelineConfig::beta1));
    f.push_back(double_field("optimizer.beta2", &PipelineConfig::beta2));
    f.push_back(double_field("optimizer.eps", &PipelineConfig::adam_eps));

    f.push_back(int_field("train.batch_size", &PipelineConfig::batch_size));
    f.push_back(int_field("train.epochs", &PipelineConfig::epochs));
    f.push_back({"train.lr_decay_epochs",
                 [](PipelineConfig& c, const std::string& v) {
                   c.lr_decay_epochs.clear();
                   for (const auto& item : split_list(v))
                     c.lr_decay_epochs.push_back(parse_number<int>("train.lr_decay_epochs", item));
                 },
                 [](const PipelineConfig& c) { return join(c.lr_decay_epochs); }});
    f.push_back(double_field("train.lr_decay_factor", &PipelineConfig::lr_decay_factor));
    f.push_back(int_field("train.refinement_start_epoch", &PipelineConfig::refinement_start_epoch));
    f.push_back(int_field("train.pairs_per_video", &PipelineConfig::pairs_per_video));
    f.push_back(int_field("train.seed", &PipelineConfig::seed));
    f.push_back(int_field("train.workers", &PipelineConfig::workers));

    f.push_back(int_field("perturbation.strip_count", PERT(strip_count)));
    f.push_back(double_field("perturbation.strip_scale_min", PERT(strip_scale_min)));
    f.push_back(double_field("perturbation.strip_scale_max", PERT(strip_scale_max)));
    f.push_back(double_field("perturbation.global_scale_min", PERT(global_scale_min)));
    f.push_back(double_field("perturbation.global_scale_max", PERT(global_scale_max)));
    f.push_back(double_field("perturbation.poisson_lambda", PERT(poisson_lambda)));
    f.push_back(double_field("perturbation.noise_scale", PERT(noise_scale)));
    f.push_back(double_field("perturbation.shrink_factor", PERT(shrink_factor)));
    f.push_back(double_field("perturbation.brightness_min", PERT(brightness_min)));
    f.push_back(double_field("perturbation.brightness_max", PERT(brightness_max)));
    f.push_back(double_field("perturbation.contrast_min", PERT(contrast_min)));
    f.push_back(double_field("perturbation.contrast_max", PERT(contrast_max)));
    f.push_back(double_field("perturbation.saturation_min", PERT(saturation_min)));
    f.push_back(double_field("perturbation.saturation_max", PERT(saturation_max)));
    f.push_back(double_field("perturbation.hue_min", PERT(hue_min)));
    f.push_back(double_field("perturbation.hue_max", PERT(hue_max)));

    f.push_back(int_field("eval.ssim_window", &PipelineConfig::ssim_window));
    f.push_back(double_field("eval.ssim_sigma", &PipelineConfig::ssim_sigma));
    f.push_back(string_field("eval.detector", &PipelineConfig::detector));
    f.push_back(string_field("eval.embedder", &PipelineConfig::embedder));
    return f;
  }();
  return table;
}

#undef PERT

void require(bool condition, const std::string& message) {
  if (!condition) throw ConfigError("invalid config: " + message);
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

void require_range(double lo, double hi, const std::string& name) {
  require(lo <= hi, name + " range is not ordered (" + format_double(lo) + " > " +
                        format_double(hi) + ")");
}

}  // namespace

void PipelineConfig::validate() const {
  require(is_power_of_two(frame_resolution) && frame_resolution >= 32,
          "model.frame_resolution must be a power of two >= 32");
  require(mask_resolution * 4 == frame_resolution,
          "model.mask_resolution must be frame_resolution / 4");
  require(base_channels > 0 && max_channels >= base_channels,
          "model.base_channels must be positive and <= model.max_channels");
  require(encoder_depth >= 1, "model.encoder_depth must be >= 1");
  require(mask_resolution % (1 << encoder_depth) == 0,
          "model.mask_resolution must be divisible by 2^encoder_depth");
  require(lambda_mask >= 0.0 && lambda_reconstruct >= 0.0, "loss weights must be nonnegative");
  for (int s : effective_reconstruct_scales()) {
    require(s >= 1 && s <= frame_resolution, "loss.reconstruct_scales entries must be in [1, frame]");
  }
  require(feature_extractor == "auto" || feature_extractor == "pyramid" ||
              feature_extractor == "identity" || feature_extractor == "vgg19",
          "loss.feature_extractor must be auto, pyramid, identity or vgg19");
  require(learning_rate > 0.0, "optimizer.learning_rate must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
          "optimizer betas must be in [0, 1)");
  require(batch_size >= 1 && epochs >= 1, "train.batch_size and train.epochs must be >= 1");
  for (std::size_t i = 0; i < lr_decay_epochs.size(); ++i) {
    require(lr_decay_epochs[i] >= 0, "train.lr_decay_epochs must be nonnegative");
    if (i > 0) require(lr_decay_epochs[i] > lr_decay_epochs[i - 1], "train.lr_decay_epochs must increase");
  }
  require(lr_decay_factor > 0.0, "train.lr_decay_factor must be positive");
  require(refinement_start_epoch >= 0, "train.refinement_start_epoch must be >= 0");
  require(pairs_per_video >= 1, "train.pairs_per_video must be >= 1");
  require(workers >= 0, "train.workers must be >= 0");
  require(ssim_window >= 1 && ssim_window % 2 == 1, "eval.ssim_window must be odd and positive");
  require(ssim_sigma > 0.0, "eval.ssim_sigma must be positive");

  const auto& p = perturbation;
  require(p.strip_count >= 1 && p.strip_count <= mask_resolution,
          "perturbation.strip_count must be in [1, mask_resolution]");
  require_range(p.strip_scale_min, p.strip_scale_max, "perturbation.strip_scale");
  require_range(p.global_scale_min, p.global_scale_max, "perturbation.global_scale");
  require(p.strip_scale_min > 0.0 && p.global_scale_min > 0.0, "perturbation scales must be positive");
  require(p.poisson_lambda >= 0.0 && p.noise_scale >= 0.0, "perturbation noise must be nonnegative");
  require(p.shrink_factor > 0.0 && p.shrink_factor <= 1.0, "perturbation.shrink_factor must be in (0, 1]");
  require_range(p.brightness_min, p.brightness_max, "perturbation.brightness");
  require_range(p.contrast_min, p.contrast_max, "perturbation.contrast");
  require_range(p.saturation_min, p.saturation_max, "perturbation.saturation");
  require_range(p.hue_min, p.hue_max, "perturbation.hue");
}

std::vector<int> PipelineConfig::effective_reconstruct_scales() const {
  if (!reconstruct_scales.empty()) return reconstruct_scales;
  return {frame_resolution, frame_resolution / 2, frame_resolution / 4};
}

std::uint64_t PipelineConfig::data_seed() const { return derive_seed(seed, "data"); }
std::uint64_t PipelineConfig::perturbation_seed() const { return derive_seed(seed, "perturbation"); }
std::uint64_t PipelineConfig::init_seed() const { return derive_seed(seed, "init"); }

std::string PipelineConfig::fingerprint() const {
  const std::string structural = "frame=" + std::to_string(frame_resolution) +
                                 ";mask=" + std::to_string(mask_resolution) +
                                 ";base=" + std::to_string(base_channels) +
                                 ";max=" + std::to_string(max_channels) +
                                 ";depth=" + std::to_string(encoder_depth);
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : structural) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void PipelineConfig::set(const std::string& dotted_key, const std::string& value) {
  for (const Field& f : fields()) {
    if (f.key == dotted_key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + dotted_key + "'");
}

void PipelineConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::string PipelineConfig::to_ini() const {
  std::string out;
  std::string section;
  for (const Field& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string s = f.key.substr(0, dot);
    if (s != section) {
      if (!section.empty()) out += "\n";
      out += "[" + s + "]\n";
      section = s;
    }
    out += f.key.substr(dot + 1) + " = " + f.get(*this) + "\n";
  }
  return out;
}

PipelineConfig PipelineConfig::from_ini_text(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  PipelineConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' outside any section");
    for (const auto& [key, value] : body) config.set(section + "." + key, value.data());
  }
  return config;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_ini_text(buffer.str());
}

PipelineConfig PipelineConfig::toy() {
  PipelineConfig c;
  c.frame_resolution = 64;
  c.mask_resolution = 16;
  c.base_channels = 8;
  c.max_channels = 64;
  c.encoder_depth = 3;
  c.batch_size = 4;
  c.epochs = 2;
  c.lr_decay_epochs = {};
  c.ssim_window = 7;
  return c;
}

}  // namespace maskanim
