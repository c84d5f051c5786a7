#include "maskanim/autograd.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "maskanim/kernels.hpp"

namespace maskanim::ag {

namespace {

thread_local bool g_grad_enabled = true;

const Tensor& empty_tensor() {
  static const Tensor empty;
  return empty;
}

Tensor& grad_buffer(Node& node) {
  if (node.grad.empty()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

bool wants_graph(std::initializer_list<const Var*> inputs) {
  if (!g_grad_enabled) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Var* v) { return v->defined() && v->requires_grad(); });
}

Var make_result(Tensor value, std::vector<std::shared_ptr<Node>> inputs,
                std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (!backward_fn) return Var(node);
  node->requires_grad = true;
  node->inputs = std::move(inputs);
  node->backward = std::move(backward_fn);
  return Var(node);
}

Var make_scalar(double value, std::vector<std::shared_ptr<Node>> inputs,
                std::function<void(Node&)> backward_fn) {
  Var v = make_result(Tensor(Shape{1, 1, 1, 1}, static_cast<float>(value)), std::move(inputs),
                      std::move(backward_fn));
  v.node()->scalar = value;
  v.node()->has_scalar = true;
  return v;
}

void require(const Var& v, const char* op) {
  if (!v.defined()) throw std::invalid_argument(std::string(op) + ": undefined input");
}

}  // namespace

Var Var::leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(node);
}

const Tensor& Var::value() const {
  if (!node_) throw std::logic_error("Var::value on undefined Var");
  return node_->value;
}

Tensor& Var::mutable_value() {
  if (!node_) throw std::logic_error("Var::mutable_value on undefined Var");
  return node_->value;
}

const Tensor& Var::grad() const { return node_ ? node_->grad : empty_tensor(); }

bool Var::has_grad() const { return node_ && !node_->grad.empty(); }

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

void Var::zero_grad() {
  if (node_) node_->grad = Tensor();
}

double Var::item() const {
  if (node_->has_scalar) return node_->scalar;
  if (node_->value.numel() != 1) throw std::logic_error("Var::item on non-scalar");
  return node_->value.data()[0];
}

Var Var::detach() const {
  auto node = std::make_shared<Node>();
  node->value = node_->value;
  node->scalar = node_->scalar;
  node->has_scalar = node_->has_scalar;
  return Var(node);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Var& root, double seed) {
  require(root, "backward");
  if (root.value().numel() != 1) throw std::invalid_argument("backward: root must be scalar");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  Node* r = root.node().get();
  grad_buffer(*r).data()[0] += static_cast<float>(seed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) {
      node->backward(*node);
      node->grad = Tensor();  // interior gradients are not retained
    }
  }
}

Var conv2d(const Var& x, const Var& weight, const Var& bias) {
  require(x, "conv2d");
  require(weight, "conv2d");
  Tensor out = kernels::conv2d_forward(x.value(), weight.value(),
                                       bias.defined() ? bias.value() : empty_tensor());
  if (!wants_graph({&x, &weight, &bias})) return make_result(std::move(out), {}, {});
  std::vector<std::shared_ptr<Node>> inputs{x.node(), weight.node()};
  if (bias.defined()) inputs.push_back(bias.node());
  return make_result(std::move(out), inputs, [](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Node* bn = self.inputs.size() > 2 ? self.inputs[2].get() : nullptr;
    if (xn.requires_grad) kernels::conv2d_backward_input(self.grad, wn.value, grad_buffer(xn));
    const bool need_b = bn != nullptr && bn->requires_grad;
    if (wn.requires_grad || need_b) {
      Tensor scratch_w;
      Tensor& gw = wn.requires_grad ? grad_buffer(wn) : (scratch_w = Tensor(wn.value.shape()));
      kernels::conv2d_backward_params(xn.value, self.grad, gw, need_b ? &grad_buffer(*bn) : nullptr);
    }
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormBuffers buffers,
               bool training) {
  require(x, "batch_norm");
  const int channels = x.value().c();
  if (gamma.value().numel() != static_cast<std::size_t>(channels) ||
      beta.value().numel() != static_cast<std::size_t>(channels)) {
    throw std::invalid_argument("batch_norm: affine parameter size mismatch");
  }
  auto stats = std::make_shared<kernels::ChannelStats>();
  Tensor out;
  if (training) {
    out = kernels::batch_norm_train(x.value(), gamma.value(), beta.value(), buffers.eps, *stats);
    const double count = static_cast<double>(x.value().n()) * x.value().shape().plane();
    const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
    for (int c = 0; c < channels; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      float& rm = buffers.running_mean.data()[c];
      float& rv = buffers.running_var.data()[c];
      rm = static_cast<float>((1.0 - buffers.momentum) * rm + buffers.momentum * stats->mean[ci]);
      rv = static_cast<float>((1.0 - buffers.momentum) * rv +
                              buffers.momentum * stats->var[ci] * unbias);
    }
  } else {
    stats->mean.resize(static_cast<std::size_t>(channels));
    stats->invstd.resize(static_cast<std::size_t>(channels));
    for (int c = 0; c < channels; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      stats->mean[ci] = buffers.running_mean.data()[c];
      stats->invstd[ci] = 1.0 / std::sqrt(static_cast<double>(buffers.running_var.data()[c]) +
                                          buffers.eps);
    }
    out = kernels::batch_norm_apply(x.value(), gamma.value(), beta.value(), stats->mean,
                                    stats->invstd);
  }
  if (!wants_graph({&x, &gamma, &beta})) return make_result(std::move(out), {}, {});
  return make_result(std::move(out), {x.node(), gamma.node(), beta.node()},
                     [stats, training](Node& self) {
                       Node& xn = *self.inputs[0];
                       Node& gn = *self.inputs[1];
                       Node& bn = *self.inputs[2];
                       kernels::batch_norm_backward(
                           xn.value, self.grad, gn.value, stats->mean, stats->invstd, training,
                           xn.requires_grad ? &grad_buffer(xn) : nullptr,
                           gn.requires_grad ? &grad_buffer(gn) : nullptr,
                           bn.requires_grad ? &grad_buffer(bn) : nullptr);
                     });
}

Var relu(const Var& x) {
  require(x, "relu");
  Tensor out(x.value().shape());
  const float* in = x.value().data();
  float* o = out.data();
  const std::size_t count = out.numel();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < count; ++i) o[i] = in[i] < 0.0f ? 0.0f : in[i];  // NaN passes through
  if (!wants_graph({&x})) return make_result(std::move(out), {}, {});
  return make_result(std::move(out), {x.node()}, [](Node& self) {
    Node& xn = *self.inputs[0];
    Tensor& g = grad_buffer(xn);
    const std::size_t n = g.numel();
    for (std::size_t i = 0; i < n; ++i) {
      if (xn.value.data()[i] > 0.0f) g.data()[i] += self.grad.data()[i];
    }
  });
}

Var sigmoid(const Var& x) {
  require(x, "sigmoid");
  Tensor out(x.value().shape());
  const float* in = x.value().data();
  float* o = out.data();
  const std::size_t count = out.numel();
  const float lo = FLT_MIN;
  const float hi = std::nextafter(1.0f, 0.0f);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < count; ++i) {
    const float s = 1.0f / (1.0f + std::exp(-in[i]));
    o[i] = std::clamp(s, lo, hi);
  }
  if (!wants_graph({&x})) return make_result(std::move(out), {}, {});
  return make_result(std::move(out), {x.node()}, [out_copy = out](Node& self) {
    Tensor& g = grad_buffer(*self.inputs[0]);
    const std::size_t n = g.numel();
    for (std::size_t i = 0; i < n; ++i) {
      const float s = out_copy.data()[i];
      g.data()[i] += self.grad.data()[i] * s * (1.0f - s);
    }
  });
}

Var avg_pool2(const Var& x) {
  require(x, "avg_pool2");
  Tensor out = kernels::avg_pool2(x.value());
  if (!wants_graph({&x})) return make_result(std::move(out), {}, {});
  return make_result(std::move(out), {x.node()}, [](Node& self) {
    kernels::avg_pool2_backward(self.grad, grad_buffer(*self.inputs[0]));
  });
}

Var max_pool2(const Var& x) {
  require(x, "max_pool2");
  auto argmax = std::make_shared<std::vector<std::uint32_t>>();
  Tensor out = kernels::max_pool2(x.value(), *argmax);
  if (!wants_graph({&x})) return make_result(std::move(out), {}, {});
  return make_result(std::move(out), {x.node()}, [argmax](Node& self) {
    kernels::max_pool2_backward(self.grad, *argmax, grad_buffer(*self.inputs[0]));
  });
}

Var resize(const Var& x, int height, int width) {
  require(x, "resize");
  if (height == x.value().h() && width == x.value().w()) return x;
  Tensor out = kernels::resize_bilinear(x.value(), height, width);
  if (!wants_graph({&x})) return make_result(std::move(out), {}, {});
  return make_result(std::move(out), {x.node()}, [](Node& self) {
    kernels::resize_bilinear_adjoint(self.grad, grad_buffer(*self.inputs[0]));
  });
}

Var concat_channels(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  const Shape first = parts.front().shape();
  int channels = 0;
  bool graph = false;
  for (const Var& p : parts) {
    require(p, "concat_channels");
    const Shape s = p.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw std::invalid_argument("concat_channels: incompatible shapes " + first.str() + " and " +
                                  s.str());
    }
    channels += s.c;
    graph = graph || (g_grad_enabled && p.requires_grad());
  }
  Tensor out(Shape{first.n, channels, first.h, first.w});
  const std::size_t plane = first.plane();
  for (int n = 0; n < first.n; ++n) {
    int offset = 0;
    for (const Var& p : parts) {
      const std::size_t count = static_cast<std::size_t>(p.shape().c) * plane;
      std::copy_n(p.value().plane(n, 0), count, out.plane(n, offset));
      offset += p.shape().c;
    }
  }
  if (!graph) return make_result(std::move(out), {}, {});
  std::vector<std::shared_ptr<Node>> inputs;
  for (const Var& p : parts) inputs.push_back(p.node());
  return make_result(std::move(out), std::move(inputs), [](Node& self) {
    const Shape s = self.grad.shape();
    const std::size_t plane = s.plane();
    int offset = 0;
    for (auto& input : self.inputs) {
      const int c = input->value.c();
      if (input->requires_grad) {
        Tensor& g = grad_buffer(*input);
        for (int n = 0; n < s.n; ++n) {
          const float* src = self.grad.plane(n, offset);
          float* dst = g.plane(n, 0);
          const std::size_t count = static_cast<std::size_t>(c) * plane;
          for (std::size_t i = 0; i < count; ++i) dst[i] += src[i];
        }
      }
      offset += c;
    }
  });
}

Var add(const Var& a, const Var& b) {
  require(a, "add");
  require(b, "add");
  Tensor out = a.value();
  out.add_(b.value());
  if (!wants_graph({&a, &b})) return make_result(std::move(out), {}, {});
  return make_result(std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (auto& input : self.inputs) {
      if (input->requires_grad) grad_buffer(*input).add_(self.grad);
    }
  });
}

Var channel_affine(const Var& x, std::vector<float> scale, std::vector<float> shift) {
  require(x, "channel_affine");
  const Shape s = x.shape();
  if (scale.size() != static_cast<std::size_t>(s.c) || shift.size() != scale.size()) {
    throw std::invalid_argument("channel_affine: coefficient count mismatch");
  }
  Tensor out(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const float* in = x.value().plane(n, c);
      float* o = out.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) o[i] = in[i] * scale[c] + shift[c];
    }
  if (!wants_graph({&x})) return make_result(std::move(out), {}, {});
  return make_result(std::move(out), {x.node()}, [scale = std::move(scale)](Node& self) {
    Tensor& g = grad_buffer(*self.inputs[0]);
    const Shape s = g.shape();
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const float* src = self.grad.plane(n, c);
        float* dst = g.plane(n, c);
        for (std::size_t i = 0; i < s.plane(); ++i) dst[i] += src[i] * scale[c];
      }
  });
}

Var mean_abs_diff(const Var& a, const Var& b) {
  require(a, "mean_abs_diff");
  require(b, "mean_abs_diff");
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("mean_abs_diff: shape mismatch " + a.shape().str() + " vs " +
                                b.shape().str());
  }
  const std::size_t count = a.value().numel();
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    sum += std::fabs(static_cast<double>(a.value().data()[i]) - b.value().data()[i]);
  }
  const double mean = count == 0 ? 0.0 : sum / static_cast<double>(count);
  if (!wants_graph({&a, &b})) return make_scalar(mean, {}, {});
  return make_scalar(mean, {a.node(), b.node()}, [count](Node& self) {
    const double g = static_cast<double>(self.grad.data()[0]) / static_cast<double>(count);
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    Tensor* ga = an.requires_grad ? &grad_buffer(an) : nullptr;
    Tensor* gb = bn.requires_grad ? &grad_buffer(bn) : nullptr;
    for (std::size_t i = 0; i < count; ++i) {
      const float d = an.value.data()[i] - bn.value.data()[i];
      const double sign = d > 0.0f ? 1.0 : (d < 0.0f ? -1.0 : 0.0);
      if (ga != nullptr) ga->data()[i] += static_cast<float>(g * sign);
      if (gb != nullptr) gb->data()[i] -= static_cast<float>(g * sign);
    }
  });
}

Var weighted_sum(std::span<const std::pair<double, Var>> terms) {
  double total = 0.0;
  bool graph = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::vector<double> weights;
  for (const auto& [w, v] : terms) {
    require(v, "weighted_sum");
    if (v.value().numel() != 1) throw std::invalid_argument("weighted_sum: non-scalar term");
    total += w * v.item();
    inputs.push_back(v.node());
    weights.push_back(w);
    graph = graph || (g_grad_enabled && v.requires_grad());
  }
  if (!graph) return make_scalar(total, {}, {});
  return make_scalar(total, std::move(inputs), [weights = std::move(weights)](Node& self) {
    const double g = self.grad.data()[0];
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& in = *self.inputs[i];
      if (in.requires_grad) grad_buffer(in).data()[0] += static_cast<float>(g * weights[i]);
    }
  });
}

}  // namespace maskanim::ag
