#include "maskanim/layers.hpp"

#include <cmath>

namespace maskanim::nn {

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, RandomStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels) * kernel * kernel);
  Tensor w(Shape{out_channels, in_channels, kernel, kernel});
  for (float& v : w.values()) v = static_cast<float>(rng.uniform(-bound, bound));
  Tensor b(Shape{1, out_channels, 1, 1});
  for (float& v : b.values()) v = static_cast<float>(rng.uniform(-bound, bound));
  weight_ = ag::Var::leaf(std::move(w), true);
  bias_ = ag::Var::leaf(std::move(b), true);
}

ag::Var Conv2d::forward(const ag::Var& x) const { return ag::conv2d(x, weight_, bias_); }

void Conv2d::collect(const std::string& prefix, Registry& out) const {
  out.params.push_back({prefix + ".weight", weight_});
  out.params.push_back({prefix + ".bias", bias_});
}

BatchNorm2d::BatchNorm2d(int channels)
    : gamma_(ag::Var::leaf(Tensor(Shape{1, channels, 1, 1}, 1.0f), true)),
      beta_(ag::Var::leaf(Tensor(Shape{1, channels, 1, 1}, 0.0f), true)),
      running_mean_(Shape{1, channels, 1, 1}, 0.0f),
      running_var_(Shape{1, channels, 1, 1}, 1.0f) {}

ag::Var BatchNorm2d::forward(const ag::Var& x, bool training) {
  return ag::batch_norm(x, gamma_, beta_, {running_mean_, running_var_}, training);
}

void BatchNorm2d::collect(const std::string& prefix, Registry& out) {
  out.params.push_back({prefix + ".gamma", gamma_});
  out.params.push_back({prefix + ".beta", beta_});
  out.buffers.push_back({prefix + ".running_mean", &running_mean_});
  out.buffers.push_back({prefix + ".running_var", &running_var_});
}

}  // namespace maskanim::nn
