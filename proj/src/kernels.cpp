#include "maskanim/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "kernel_common.hpp"

namespace maskanim::kernels {

using detail::bilinear_taps;
using detail::lerp_bounded;

int thread_count() { return omp_get_max_threads(); }

void set_thread_count(int threads) {
  if (threads >= 1) omp_set_num_threads(threads);
}

namespace {

// Valid [lo, hi) range of output positions for a kernel offset `d` so that
// position + d stays within [0, size).
inline void valid_range(int size, int d, int& lo, int& hi) {
  lo = std::max(0, -d);
  hi = std::min(size, size - d);
}

}  // namespace

Tensor conv2d_forward(const Tensor& in, const Tensor& weight, const Tensor& bias) {
  detail::check_conv_shapes(in, weight, bias);
  const int batch = in.n();
  const int in_c = in.c();
  const int out_c = weight.n();
  const int height = in.h();
  const int width = in.w();
  const int k = weight.h();
  const int pad = k / 2;
  Tensor out(Shape{batch, out_c, height, width});

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < batch; ++n) {
    for (int oc = 0; oc < out_c; ++oc) {
      float* o = out.plane(n, oc);
      std::fill(o, o + out.shape().plane(), bias.empty() ? 0.0f : bias.data()[oc]);
      for (int ic = 0; ic < in_c; ++ic) {
        const float* ip = in.plane(n, ic);
        const float* wk = weight.plane(oc, ic);
        for (int ky = 0; ky < k; ++ky) {
          const int dy = ky - pad;
          int y0, y1;
          valid_range(height, dy, y0, y1);
          for (int kx = 0; kx < k; ++kx) {
            const int dx = kx - pad;
            int x0, x1;
            valid_range(width, dx, x0, x1);
            const float wv = wk[ky * k + kx];
            for (int y = y0; y < y1; ++y) {
              float* orow = o + static_cast<std::size_t>(y) * width;
              const float* irow = ip + static_cast<std::size_t>(y + dy) * width + dx;
#pragma omp simd
              for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x];
            }
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward_input(const Tensor& grad_out, const Tensor& weight, Tensor& grad_in) {
  const int batch = grad_in.n();
  const int in_c = grad_in.c();
  const int out_c = weight.n();
  const int height = grad_in.h();
  const int width = grad_in.w();
  const int k = weight.h();
  const int pad = k / 2;

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < batch; ++n) {
    for (int ic = 0; ic < in_c; ++ic) {
      float* gi = grad_in.plane(n, ic);
      for (int oc = 0; oc < out_c; ++oc) {
        const float* go = grad_out.plane(n, oc);
        const float* wk = weight.plane(oc, ic);
        for (int ky = 0; ky < k; ++ky) {
          const int dy = ky - pad;
          int y0, y1;
          valid_range(height, dy, y0, y1);
          for (int kx = 0; kx < k; ++kx) {
            const int dx = kx - pad;
            int x0, x1;
            valid_range(width, dx, x0, x1);
            const float wv = wk[ky * k + kx];
            for (int y = y0; y < y1; ++y) {
              const float* grow = go + static_cast<std::size_t>(y) * width;
              float* irow = gi + static_cast<std::size_t>(y + dy) * width + dx;
#pragma omp simd
              for (int x = x0; x < x1; ++x) irow[x] += wv * grow[x];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_params(const Tensor& in, const Tensor& grad_out, Tensor& grad_weight,
                            Tensor* grad_bias) {
  const int batch = in.n();
  const int in_c = grad_weight.c();
  const int out_c = grad_weight.n();
  const int height = in.h();
  const int width = in.w();
  const int k = grad_weight.h();
  const int pad = k / 2;

#pragma omp parallel for collapse(2) schedule(static)
  for (int oc = 0; oc < out_c; ++oc) {
    for (int ic = 0; ic < in_c; ++ic) {
      float* gw = grad_weight.plane(oc, ic);
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        int y0, y1;
        valid_range(height, dy, y0, y1);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          int x0, x1;
          valid_range(width, dx, x0, x1);
          double acc = 0.0;
          for (int n = 0; n < batch; ++n) {
            const float* go = grad_out.plane(n, oc);
            const float* ip = in.plane(n, ic);
            for (int y = y0; y < y1; ++y) {
              const float* grow = go + static_cast<std::size_t>(y) * width;
              const float* irow = ip + static_cast<std::size_t>(y + dy) * width + dx;
              float row = 0.0f;
#pragma omp simd reduction(+ : row)
              for (int x = x0; x < x1; ++x) row += grow[x] * irow[x];
              acc += row;
            }
          }
          gw[ky * k + kx] += static_cast<float>(acc);
        }
      }
    }
  }

  if (grad_bias != nullptr) {
    const std::size_t plane = grad_out.shape().plane();
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < out_c; ++oc) {
      double acc = 0.0;
      for (int n = 0; n < batch; ++n) {
        const float* go = grad_out.plane(n, oc);
        for (std::size_t i = 0; i < plane; ++i) acc += go[i];
      }
      grad_bias->data()[oc] += static_cast<float>(acc);
    }
  }
}

Tensor resize_bilinear(const Tensor& in, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize: non-positive target size");
  const auto ty = bilinear_taps(in.h(), out_h);
  const auto tx = bilinear_taps(in.w(), out_w);
  Tensor out(Shape{in.n(), in.c(), out_h, out_w});
  const int planes = in.n() * in.c();
  const int in_w = in.w();

#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const float* ip = in.data() + static_cast<std::size_t>(p) * in.shape().plane();
    float* op = out.data() + static_cast<std::size_t>(p) * out.shape().plane();
    for (int y = 0; y < out_h; ++y) {
      const auto& a = ty[static_cast<std::size_t>(y)];
      const float* r0 = ip + static_cast<std::size_t>(a.i0) * in_w;
      const float* r1 = ip + static_cast<std::size_t>(a.i1) * in_w;
      float* orow = op + static_cast<std::size_t>(y) * out_w;
      for (int x = 0; x < out_w; ++x) {
        const auto& b = tx[static_cast<std::size_t>(x)];
        const float top = lerp_bounded(r0[b.i0], r0[b.i1], b.t);
        const float bot = lerp_bounded(r1[b.i0], r1[b.i1], b.t);
        orow[x] = lerp_bounded(top, bot, a.t);
      }
    }
  }
  return out;
}

void resize_bilinear_adjoint(const Tensor& grad_out, Tensor& grad_in) {
  const auto ty = bilinear_taps(grad_in.h(), grad_out.h());
  const auto tx = bilinear_taps(grad_in.w(), grad_out.w());
  const int planes = grad_out.n() * grad_out.c();
  const int out_h = grad_out.h();
  const int out_w = grad_out.w();
  const int in_w = grad_in.w();

#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const float* gp = grad_out.data() + static_cast<std::size_t>(p) * grad_out.shape().plane();
    float* ip = grad_in.data() + static_cast<std::size_t>(p) * grad_in.shape().plane();
    for (int y = 0; y < out_h; ++y) {
      const auto& a = ty[static_cast<std::size_t>(y)];
      float* r0 = ip + static_cast<std::size_t>(a.i0) * in_w;
      float* r1 = ip + static_cast<std::size_t>(a.i1) * in_w;
      const float* grow = gp + static_cast<std::size_t>(y) * out_w;
      for (int x = 0; x < out_w; ++x) {
        const auto& b = tx[static_cast<std::size_t>(x)];
        const float g = grow[x];
        r0[b.i0] += g * (1.0f - a.t) * (1.0f - b.t);
        r0[b.i1] += g * (1.0f - a.t) * b.t;
        r1[b.i0] += g * a.t * (1.0f - b.t);
        r1[b.i1] += g * a.t * b.t;
      }
    }
  }
}

Tensor avg_pool2(const Tensor& in) {
  detail::check_even(in, "avg_pool2");
  Tensor out(Shape{in.n(), in.c(), in.h() / 2, in.w() / 2});
  const int planes = in.n() * in.c();
  const int in_w = in.w();
  const int out_h = out.h();
  const int out_w = out.w();

#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const float* ip = in.data() + static_cast<std::size_t>(p) * in.shape().plane();
    float* op = out.data() + static_cast<std::size_t>(p) * out.shape().plane();
    for (int y = 0; y < out_h; ++y) {
      const float* r0 = ip + static_cast<std::size_t>(2 * y) * in_w;
      const float* r1 = r0 + in_w;
      for (int x = 0; x < out_w; ++x) {
        op[static_cast<std::size_t>(y) * out_w + x] =
            0.25f * (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]);
      }
    }
  }
  return out;
}

void avg_pool2_backward(const Tensor& grad_out, Tensor& grad_in) {
  const int planes = grad_out.n() * grad_out.c();
  const int in_w = grad_in.w();
  const int out_h = grad_out.h();
  const int out_w = grad_out.w();

#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const float* gp = grad_out.data() + static_cast<std::size_t>(p) * grad_out.shape().plane();
    float* ip = grad_in.data() + static_cast<std::size_t>(p) * grad_in.shape().plane();
    for (int y = 0; y < out_h; ++y) {
      float* r0 = ip + static_cast<std::size_t>(2 * y) * in_w;
      float* r1 = r0 + in_w;
      for (int x = 0; x < out_w; ++x) {
        const float g = 0.25f * gp[static_cast<std::size_t>(y) * out_w + x];
        r0[2 * x] += g;
        r0[2 * x + 1] += g;
        r1[2 * x] += g;
        r1[2 * x + 1] += g;
      }
    }
  }
}

Tensor max_pool2(const Tensor& in, std::vector<std::uint32_t>& argmax) {
  detail::check_even(in, "max_pool2");
  Tensor out(Shape{in.n(), in.c(), in.h() / 2, in.w() / 2});
  argmax.assign(out.numel(), 0);
  const int planes = in.n() * in.c();
  const int in_w = in.w();
  const int out_h = out.h();
  const int out_w = out.w();

#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const float* ip = in.data() + static_cast<std::size_t>(p) * in.shape().plane();
    const std::size_t base = static_cast<std::size_t>(p) * out.shape().plane();
    float* op = out.data() + base;
    for (int y = 0; y < out_h; ++y) {
      for (int x = 0; x < out_w; ++x) {
        float best = -std::numeric_limits<float>::infinity();
        std::uint32_t best_idx = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const auto idx = static_cast<std::uint32_t>((2 * y + dy) * in_w + 2 * x + dx);
            if (ip[idx] > best) {
              best = ip[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t o = static_cast<std::size_t>(y) * out_w + x;
        op[o] = best;
        argmax[base + o] = best_idx;
      }
    }
  }
  return out;
}

void max_pool2_backward(const Tensor& grad_out, const std::vector<std::uint32_t>& argmax,
                        Tensor& grad_in) {
  const int planes = grad_out.n() * grad_out.c();
  const std::size_t out_plane = grad_out.shape().plane();

#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const std::size_t base = static_cast<std::size_t>(p) * out_plane;
    float* ip = grad_in.data() + static_cast<std::size_t>(p) * grad_in.shape().plane();
    for (std::size_t o = 0; o < out_plane; ++o) ip[argmax[base + o]] += grad_out.data()[base + o];
  }
}

Tensor batch_norm_train(const Tensor& in, const Tensor& gamma, const Tensor& beta, double eps,
                        ChannelStats& stats) {
  const int channels = in.c();
  const auto cs = static_cast<std::size_t>(channels);
  stats.mean.assign(cs, 0.0);
  stats.var.assign(cs, 0.0);
  stats.invstd.assign(cs, 0.0);
  const std::size_t plane = in.shape().plane();
  const double count = static_cast<double>(in.n()) * static_cast<double>(plane);

#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (int n = 0; n < in.n(); ++n) {
      const float* p = in.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) sum += p[i];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (int n = 0; n < in.n(); ++n) {
      const float* p = in.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = p[i] - mean;
        sq += d * d;
      }
    }
    const auto ci = static_cast<std::size_t>(c);
    stats.mean[ci] = mean;
    stats.var[ci] = sq / count;
    stats.invstd[ci] = 1.0 / std::sqrt(sq / count + eps);
  }
  return batch_norm_apply(in, gamma, beta, stats.mean, stats.invstd);
}

Tensor batch_norm_apply(const Tensor& in, const Tensor& gamma, const Tensor& beta,
                        const std::vector<double>& mean, const std::vector<double>& invstd) {
  Tensor out(in.shape());
  const int planes = in.n() * in.c();
  const std::size_t plane = in.shape().plane();

#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const int c = p % in.c();
    const auto ci = static_cast<std::size_t>(c);
    const float* ip = in.data() + static_cast<std::size_t>(p) * plane;
    float* op = out.data() + static_cast<std::size_t>(p) * plane;
    const float g = gamma.data()[c];
    const float b = beta.data()[c];
    for (std::size_t i = 0; i < plane; ++i) {
      const auto xhat = static_cast<float>((ip[i] - mean[ci]) * invstd[ci]);
      op[i] = xhat * g + b;
    }
  }
  return out;
}

void batch_norm_backward(const Tensor& in, const Tensor& grad_out, const Tensor& gamma,
                         const std::vector<double>& mean, const std::vector<double>& invstd,
                         bool batch_statistics, Tensor* grad_in, Tensor* grad_gamma,
                         Tensor* grad_beta) {
  const int channels = in.c();
  const std::size_t plane = in.shape().plane();
  const double count = static_cast<double>(in.n()) * static_cast<double>(plane);

#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int n = 0; n < in.n(); ++n) {
      const float* ip = in.plane(n, c);
      const float* gp = grad_out.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        const double dy = gp[i];
        sum_dy += dy;
        sum_dy_xhat += dy * (ip[i] - mean[ci]) * invstd[ci];
      }
    }
    if (grad_gamma != nullptr) grad_gamma->data()[c] += static_cast<float>(sum_dy_xhat);
    if (grad_beta != nullptr) grad_beta->data()[c] += static_cast<float>(sum_dy);
    if (grad_in == nullptr) continue;
    const double g = gamma.data()[c];
    for (int n = 0; n < in.n(); ++n) {
      const float* ip = in.plane(n, c);
      const float* gp = grad_out.plane(n, c);
      float* dp = grad_in->plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        const double dy = gp[i];
        double dx;
        if (batch_statistics) {
          const double xhat = (ip[i] - mean[ci]) * invstd[ci];
          dx = g * invstd[ci] / count * (count * dy - sum_dy - xhat * sum_dy_xhat);
        } else {
          dx = g * invstd[ci] * dy;
        }
        dp[i] += static_cast<float>(dx);
      }
    }
  }
}

}  // namespace maskanim::kernels
