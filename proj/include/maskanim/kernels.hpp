#pragma once

// Numeric kernels behind the autograd ops.
//
// `maskanim::kernels` holds the OpenMP-parallel versions used everywhere.
// `maskanim::kernels::reference` holds straightforward serial versions with
// identical signatures; they exist for the kernel tests and the benchmark.
//
// Parallel kernels partition work so every output element is produced by one
// thread in a fixed order. Results are therefore bit-identical for any
// thread count.
//
// Layouts: activations are NCHW. Convolution weights are (out, in, k, k)
// stored as Shape{out, in, k, k}; biases and per-channel affine parameters are
// Shape{1, C, 1, 1}. Convolutions are stride 1 with zero padding k / 2.
//
// Bilinear resampling uses half-pixel centers: output index i maps to source
// coordinate (i + 0.5) * in / out - 0.5, clamped to [0, in - 1].

#include <cstdint>
#include <vector>

#include "maskanim/tensor.hpp"

namespace maskanim::kernels {

/// Per-channel statistics produced by a training-mode batch norm.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> invstd;
  std::vector<double> var;  // biased batch variance
};

#define MASKANIM_KERNEL_DECLS                                                                    \
  Tensor conv2d_forward(const Tensor& in, const Tensor& weight, const Tensor& bias);             \
  void conv2d_backward_input(const Tensor& grad_out, const Tensor& weight, Tensor& grad_in);      \
  void conv2d_backward_params(const Tensor& in, const Tensor& grad_out, Tensor& grad_weight,     \
                              Tensor* grad_bias);                                                \
  Tensor resize_bilinear(const Tensor& in, int out_h, int out_w);                                \
  void resize_bilinear_adjoint(const Tensor& grad_out, Tensor& grad_in);                         \
  Tensor avg_pool2(const Tensor& in);                                                            \
  void avg_pool2_backward(const Tensor& grad_out, Tensor& grad_in);                              \
  Tensor max_pool2(const Tensor& in, std::vector<std::uint32_t>& argmax);                        \
  void max_pool2_backward(const Tensor& grad_out, const std::vector<std::uint32_t>& argmax,      \
                          Tensor& grad_in);                                                      \
  Tensor batch_norm_train(const Tensor& in, const Tensor& gamma, const Tensor& beta, double eps,  \
                          ChannelStats& stats);                                                  \
  Tensor batch_norm_apply(const Tensor& in, const Tensor& gamma, const Tensor& beta,             \
                          const std::vector<double>& mean, const std::vector<double>& invstd);   \
  void batch_norm_backward(const Tensor& in, const Tensor& grad_out, const Tensor& gamma,        \
                           const std::vector<double>& mean, const std::vector<double>& invstd,   \
                           bool batch_statistics, Tensor* grad_in, Tensor* grad_gamma,           \
                           Tensor* grad_beta);

// All accumulate-style kernels (`backward*`, `adjoint`) add into their output
// arguments, which must already have the right shape.
MASKANIM_KERNEL_DECLS

namespace reference {
MASKANIM_KERNEL_DECLS
}  // namespace reference

#undef MASKANIM_KERNEL_DECLS

/// Number of OpenMP threads the parallel kernels will use.
int thread_count();
/// Sets the OpenMP thread count; values < 1 are ignored.
void set_thread_count(int threads);

}  // namespace maskanim::kernels
