#include "maskanim/optimizer.hpp"

#include <cmath>

#include "maskanim/errors.hpp"

namespace maskanim {

int Adam::step(const std::vector<nn::NamedParam>& params, double learning_rate) {
  int stepped = 0;
  for (const nn::NamedParam& p : params) {
    ag::Var var = p.var;
    if (!var.has_grad()) continue;
    Slot& slot = slots_[p.name];
    Tensor& value = var.mutable_value();
    if (slot.m.empty()) {
      slot.m = Tensor(value.shape(), 0.0f);
      slot.v = Tensor(value.shape(), 0.0f);
    }
    ++slot.step;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(slot.step));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(slot.step));
    const float* g = var.grad().data();
    float* m = slot.m.data();
    float* v = slot.v.data();
    float* w = value.data();
    const auto b1 = static_cast<float>(beta1_);
    const auto b2 = static_cast<float>(beta2_);
    for (std::size_t i = 0; i < value.numel(); ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] = static_cast<float>(w[i] - learning_rate * m_hat / (std::sqrt(v_hat) + eps_));
    }
    ++stepped;
  }
  for (const nn::NamedParam& p : params) {
    ag::Var var = p.var;
    var.zero_grad();
  }
  return stepped;
}

std::int64_t Adam::steps(const std::string& name) const {
  const auto it = slots_.find(name);
  return it == slots_.end() ? 0 : it->second.step;
}

void Adam::save(TensorArchive& archive) const {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [name, slot] : slots_) {
    archive.tensors.emplace_back("adam.m/" + name, slot.m);
    archive.tensors.emplace_back("adam.v/" + name, slot.v);
    counts[name] = slot.step;
  }
  archive.meta["adam"] = counts;
}

void Adam::load(const TensorArchive& archive) {
  slots_.clear();
  if (!archive.meta.contains("adam")) return;
  for (const auto& [name, count] : archive.meta.at("adam").items()) {
    Slot slot;
    slot.m = archive.get("adam.m/" + name);
    slot.v = archive.get("adam.v/" + name);
    slot.step = count.get<std::int64_t>();
    slots_.emplace(name, std::move(slot));
  }
}

}  // namespace maskanim
