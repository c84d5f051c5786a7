// Serial reference kernels. Written for clarity, one output element at a time.

#include <cmath>
#include <limits>

#include "kernel_common.hpp"
#include "maskanim/kernels.hpp"

namespace maskanim::kernels::reference {

using detail::bilinear_taps;
using detail::lerp_bounded;

Tensor conv2d_forward(const Tensor& in, const Tensor& weight, const Tensor& bias) {
  detail::check_conv_shapes(in, weight, bias);
  const int k = weight.h();
  const int pad = k / 2;
  Tensor out(Shape{in.n(), weight.n(), in.h(), in.w()});
  for (int n = 0; n < in.n(); ++n) {
    for (int oc = 0; oc < weight.n(); ++oc) {
      for (int y = 0; y < in.h(); ++y) {
        for (int x = 0; x < in.w(); ++x) {
          float acc = bias.empty() ? 0.0f : bias.data()[oc];
          for (int ic = 0; ic < in.c(); ++ic) {
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const int iy = y + ky - pad;
                const int ix = x + kx - pad;
                if (iy < 0 || iy >= in.h() || ix < 0 || ix >= in.w()) continue;
                acc += weight.at(oc, ic, ky, kx) * in.at(n, ic, iy, ix);
              }
            }
          }
          out.at(n, oc, y, x) = acc;
        }
      }
    }
  }
  return out;
}

void conv2d_backward_input(const Tensor& grad_out, const Tensor& weight, Tensor& grad_in) {
  const int k = weight.h();
  const int pad = k / 2;
  for (int n = 0; n < grad_in.n(); ++n) {
    for (int ic = 0; ic < grad_in.c(); ++ic) {
      for (int iy = 0; iy < grad_in.h(); ++iy) {
        for (int ix = 0; ix < grad_in.w(); ++ix) {
          double acc = 0.0;
          for (int oc = 0; oc < weight.n(); ++oc) {
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const int y = iy - ky + pad;
                const int x = ix - kx + pad;
                if (y < 0 || y >= grad_out.h() || x < 0 || x >= grad_out.w()) continue;
                acc += static_cast<double>(weight.at(oc, ic, ky, kx)) * grad_out.at(n, oc, y, x);
              }
            }
          }
          grad_in.at(n, ic, iy, ix) += static_cast<float>(acc);
        }
      }
    }
  }
}

void conv2d_backward_params(const Tensor& in, const Tensor& grad_out, Tensor& grad_weight,
                            Tensor* grad_bias) {
  const int k = grad_weight.h();
  const int pad = k / 2;
  for (int oc = 0; oc < grad_weight.n(); ++oc) {
    for (int ic = 0; ic < grad_weight.c(); ++ic) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          double acc = 0.0;
          for (int n = 0; n < in.n(); ++n) {
            for (int y = 0; y < grad_out.h(); ++y) {
              for (int x = 0; x < grad_out.w(); ++x) {
                const int iy = y + ky - pad;
                const int ix = x + kx - pad;
                if (iy < 0 || iy >= in.h() || ix < 0 || ix >= in.w()) continue;
                acc += static_cast<double>(grad_out.at(n, oc, y, x)) * in.at(n, ic, iy, ix);
              }
            }
          }
          grad_weight.at(oc, ic, ky, kx) += static_cast<float>(acc);
        }
      }
    }
    if (grad_bias != nullptr) {
      double acc = 0.0;
      for (int n = 0; n < grad_out.n(); ++n)
        for (int y = 0; y < grad_out.h(); ++y)
          for (int x = 0; x < grad_out.w(); ++x) acc += grad_out.at(n, oc, y, x);
      grad_bias->data()[oc] += static_cast<float>(acc);
    }
  }
}

Tensor resize_bilinear(const Tensor& in, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize: non-positive target size");
  const auto ty = bilinear_taps(in.h(), out_h);
  const auto tx = bilinear_taps(in.w(), out_w);
  Tensor out(Shape{in.n(), in.c(), out_h, out_w});
  for (int n = 0; n < in.n(); ++n) {
    for (int c = 0; c < in.c(); ++c) {
      for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
          const auto& a = ty[static_cast<std::size_t>(y)];
          const auto& b = tx[static_cast<std::size_t>(x)];
          const float top = lerp_bounded(in.at(n, c, a.i0, b.i0), in.at(n, c, a.i0, b.i1), b.t);
          const float bot = lerp_bounded(in.at(n, c, a.i1, b.i0), in.at(n, c, a.i1, b.i1), b.t);
          out.at(n, c, y, x) = lerp_bounded(top, bot, a.t);
        }
      }
    }
  }
  return out;
}

void resize_bilinear_adjoint(const Tensor& grad_out, Tensor& grad_in) {
  const auto ty = bilinear_taps(grad_in.h(), grad_out.h());
  const auto tx = bilinear_taps(grad_in.w(), grad_out.w());
  for (int n = 0; n < grad_out.n(); ++n) {
    for (int c = 0; c < grad_out.c(); ++c) {
      for (int y = 0; y < grad_out.h(); ++y) {
        for (int x = 0; x < grad_out.w(); ++x) {
          const auto& a = ty[static_cast<std::size_t>(y)];
          const auto& b = tx[static_cast<std::size_t>(x)];
          const float g = grad_out.at(n, c, y, x);
          grad_in.at(n, c, a.i0, b.i0) += g * (1.0f - a.t) * (1.0f - b.t);
          grad_in.at(n, c, a.i0, b.i1) += g * (1.0f - a.t) * b.t;
          grad_in.at(n, c, a.i1, b.i0) += g * a.t * (1.0f - b.t);
          grad_in.at(n, c, a.i1, b.i1) += g * a.t * b.t;
        }
      }
    }
  }
}

Tensor avg_pool2(const Tensor& in) {
  detail::check_even(in, "avg_pool2");
  Tensor out(Shape{in.n(), in.c(), in.h() / 2, in.w() / 2});
  for (int n = 0; n < in.n(); ++n)
    for (int c = 0; c < in.c(); ++c)
      for (int y = 0; y < out.h(); ++y)
        for (int x = 0; x < out.w(); ++x) {
          const float s = in.at(n, c, 2 * y, 2 * x) + in.at(n, c, 2 * y, 2 * x + 1) +
                          in.at(n, c, 2 * y + 1, 2 * x) + in.at(n, c, 2 * y + 1, 2 * x + 1);
          out.at(n, c, y, x) = 0.25f * s;
        }
  return out;
}

void avg_pool2_backward(const Tensor& grad_out, Tensor& grad_in) {
  for (int n = 0; n < grad_out.n(); ++n)
    for (int c = 0; c < grad_out.c(); ++c)
      for (int y = 0; y < grad_out.h(); ++y)
        for (int x = 0; x < grad_out.w(); ++x) {
          const float g = 0.25f * grad_out.at(n, c, y, x);
          grad_in.at(n, c, 2 * y, 2 * x) += g;
          grad_in.at(n, c, 2 * y, 2 * x + 1) += g;
          grad_in.at(n, c, 2 * y + 1, 2 * x) += g;
          grad_in.at(n, c, 2 * y + 1, 2 * x + 1) += g;
        }
}

Tensor max_pool2(const Tensor& in, std::vector<std::uint32_t>& argmax) {
  detail::check_even(in, "max_pool2");
  Tensor out(Shape{in.n(), in.c(), in.h() / 2, in.w() / 2});
  argmax.assign(out.numel(), 0);
  std::size_t o = 0;
  for (int n = 0; n < in.n(); ++n)
    for (int c = 0; c < in.c(); ++c)
      for (int y = 0; y < out.h(); ++y)
        for (int x = 0; x < out.w(); ++x, ++o) {
          float best = -std::numeric_limits<float>::infinity();
          std::uint32_t best_idx = 0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int iy = 2 * y + dy;
              const int ix = 2 * x + dx;
              const float v = in.at(n, c, iy, ix);
              if (v > best) {
                best = v;
                best_idx = static_cast<std::uint32_t>(iy * in.w() + ix);
              }
            }
          out.at(n, c, y, x) = best;
          argmax[o] = best_idx;
        }
  return out;
}

void max_pool2_backward(const Tensor& grad_out, const std::vector<std::uint32_t>& argmax,
                        Tensor& grad_in) {
  std::size_t o = 0;
  for (int n = 0; n < grad_out.n(); ++n)
    for (int c = 0; c < grad_out.c(); ++c)
      for (int y = 0; y < grad_out.h(); ++y)
        for (int x = 0; x < grad_out.w(); ++x, ++o) grad_in.plane(n, c)[argmax[o]] += grad_out.at(n, c, y, x);
}

Tensor batch_norm_train(const Tensor& in, const Tensor& gamma, const Tensor& beta, double eps,
                        ChannelStats& stats) {
  const int channels = in.c();
  stats.mean.assign(static_cast<std::size_t>(channels), 0.0);
  stats.var.assign(static_cast<std::size_t>(channels), 0.0);
  stats.invstd.assign(static_cast<std::size_t>(channels), 0.0);
  const double count = static_cast<double>(in.n()) * in.h() * in.w();
  for (int c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (int n = 0; n < in.n(); ++n)
      for (int y = 0; y < in.h(); ++y)
        for (int x = 0; x < in.w(); ++x) sum += in.at(n, c, y, x);
    const double mean = sum / count;
    double sq = 0.0;
    for (int n = 0; n < in.n(); ++n)
      for (int y = 0; y < in.h(); ++y)
        for (int x = 0; x < in.w(); ++x) {
          const double d = in.at(n, c, y, x) - mean;
          sq += d * d;
        }
    stats.mean[static_cast<std::size_t>(c)] = mean;
    stats.var[static_cast<std::size_t>(c)] = sq / count;
    stats.invstd[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(sq / count + eps);
  }
  return batch_norm_apply(in, gamma, beta, stats.mean, stats.invstd);
}

Tensor batch_norm_apply(const Tensor& in, const Tensor& gamma, const Tensor& beta,
                        const std::vector<double>& mean, const std::vector<double>& invstd) {
  Tensor out(in.shape());
  for (int n = 0; n < in.n(); ++n)
    for (int c = 0; c < in.c(); ++c)
      for (int y = 0; y < in.h(); ++y)
        for (int x = 0; x < in.w(); ++x) {
          const auto ci = static_cast<std::size_t>(c);
          const auto xhat = static_cast<float>((in.at(n, c, y, x) - mean[ci]) * invstd[ci]);
          out.at(n, c, y, x) = xhat * gamma.data()[c] + beta.data()[c];
        }
  return out;
}

void batch_norm_backward(const Tensor& in, const Tensor& grad_out, const Tensor& gamma,
                         const std::vector<double>& mean, const std::vector<double>& invstd,
                         bool batch_statistics, Tensor* grad_in, Tensor* grad_gamma,
                         Tensor* grad_beta) {
  const double count = static_cast<double>(in.n()) * in.h() * in.w();
  for (int c = 0; c < in.c(); ++c) {
    const auto ci = static_cast<std::size_t>(c);
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int n = 0; n < in.n(); ++n)
      for (int y = 0; y < in.h(); ++y)
        for (int x = 0; x < in.w(); ++x) {
          const double dy = grad_out.at(n, c, y, x);
          sum_dy += dy;
          sum_dy_xhat += dy * (in.at(n, c, y, x) - mean[ci]) * invstd[ci];
        }
    if (grad_gamma != nullptr) grad_gamma->data()[c] += static_cast<float>(sum_dy_xhat);
    if (grad_beta != nullptr) grad_beta->data()[c] += static_cast<float>(sum_dy);
    if (grad_in == nullptr) continue;
    const double g = gamma.data()[c];
    for (int n = 0; n < in.n(); ++n)
      for (int y = 0; y < in.h(); ++y)
        for (int x = 0; x < in.w(); ++x) {
          const double dy = grad_out.at(n, c, y, x);
          double dx;
          if (batch_statistics) {
            const double xhat = (in.at(n, c, y, x) - mean[ci]) * invstd[ci];
            dx = g * invstd[ci] / count * (count * dy - sum_dy - xhat * sum_dy_xhat);
          } else {
            dx = g * invstd[ci] * dy;
          }
          grad_in->at(n, c, y, x) += static_cast<float>(dx);
        }
  }
}

}  // namespace maskanim::kernels::reference
