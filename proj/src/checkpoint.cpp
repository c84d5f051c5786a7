#include "maskanim/checkpoint.hpp"

#include "maskanim/errors.hpp"

namespace maskanim {

void save_checkpoint(const std::filesystem::path& path, ModelBundle& models,
                     const Adam* optimizer, const PipelineConfig& config,
                     const CheckpointInfo& info) {
  TensorArchive archive;
  archive.meta["kind"] = "maskanim-checkpoint";
  archive.meta["fingerprint"] = config.fingerprint();
  archive.meta["config"] = config.to_ini();
  archive.meta["epoch"] = info.epoch;
  archive.meta["global_step"] = info.global_step;
  archive.meta["rng"] = info.rng_states;
  nn::Registry reg = models.registry();
  for (const auto& p : reg.params) archive.tensors.emplace_back(p.name, p.var.value());
  for (const auto& b : reg.buffers) archive.tensors.emplace_back(b.name, *b.tensor);
  if (optimizer != nullptr) optimizer->save(archive);
  write_archive(path, archive);
}

namespace {

void restore(const TensorArchive& archive, const std::string& name, Tensor& target,
             const std::filesystem::path& path) {
  if (!archive.contains(name)) throw IoError(path.string() + ": missing tensor '" + name + "'");
  const Tensor& stored = archive.get(name);
  if (stored.shape() != target.shape()) {
    throw IoError(path.string() + ": tensor '" + name + "' has shape " + stored.shape().str() +
                  ", expected " + target.shape().str());
  }
  target = stored;
}

}  // namespace

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const PipelineConfig* expected) {
  TensorArchive archive = read_archive(path);
  if (archive.meta.value("kind", "") != "maskanim-checkpoint") {
    throw IoError(path.string() + ": not a checkpoint");
  }
  const auto stored_fingerprint = archive.meta.at("fingerprint").get<std::string>();
  PipelineConfig config = PipelineConfig::from_ini_text(archive.meta.at("config").get<std::string>());
  if (expected != nullptr && expected->fingerprint() != stored_fingerprint) {
    throw ConfigError(path.string() + ": checkpoint fingerprint " + stored_fingerprint +
                      " does not match configuration fingerprint " + expected->fingerprint());
  }

  LoadedCheckpoint out{config, ModelBundle(config),
                       Adam(config.beta1, config.beta2, config.adam_eps), {}};
  nn::Registry reg = out.models.registry();
  for (auto& p : reg.params) restore(archive, p.name, p.var.mutable_value(), path);
  for (auto& b : reg.buffers) restore(archive, b.name, *b.tensor, path);
  out.optimizer.load(archive);
  out.info.epoch = archive.meta.value("epoch", 0);
  out.info.global_step = archive.meta.value("global_step", std::int64_t{0});
  if (archive.meta.contains("rng")) {
    out.info.rng_states = archive.meta.at("rng").get<std::map<std::string, std::string>>();
  }
  return out;
}

}  // namespace maskanim
