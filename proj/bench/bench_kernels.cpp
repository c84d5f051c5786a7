// Parallel kernels against their serial reference versions.
// Run with --benchmark_filter=... to narrow; thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "maskanim/kernels.hpp"
#include "maskanim/random.hpp"

namespace {

using maskanim::RandomStream;
using maskanim::Shape;
using maskanim::Tensor;
namespace kernels = maskanim::kernels;

Tensor noise(Shape shape, std::uint64_t seed) {
  RandomStream rng(seed);
  Tensor t(shape);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

// Toy-scale activation: batch 4, 16 channels, 64x64.
struct ConvCase {
  Tensor in = noise(Shape{4, 16, 64, 64}, 1);
  Tensor weight = noise(Shape{16, 16, 3, 3}, 2);
  Tensor bias = noise(Shape{1, 16, 1, 1}, 3);
  Tensor grad_out = noise(Shape{4, 16, 64, 64}, 4);
};

template <bool Parallel>
void conv_forward(benchmark::State& state) {
  const ConvCase c;
  for (auto _ : state) {
    Tensor out = Parallel ? kernels::conv2d_forward(c.in, c.weight, c.bias)
                          : kernels::reference::conv2d_forward(c.in, c.weight, c.bias);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void conv_backward(benchmark::State& state) {
  const ConvCase c;
  Tensor gi(c.in.shape()), gw(c.weight.shape()), gb(c.bias.shape());
  for (auto _ : state) {
    if (Parallel) {
      kernels::conv2d_backward_input(c.grad_out, c.weight, gi);
      kernels::conv2d_backward_params(c.in, c.grad_out, gw, &gb);
    } else {
      kernels::reference::conv2d_backward_input(c.grad_out, c.weight, gi);
      kernels::reference::conv2d_backward_params(c.in, c.grad_out, gw, &gb);
    }
    benchmark::DoNotOptimize(gw.data());
  }
}

template <bool Parallel>
void resize(benchmark::State& state) {
  const Tensor in = noise(Shape{4, 3, 64, 64}, 5);
  for (auto _ : state) {
    Tensor out = Parallel ? kernels::resize_bilinear(in, 256, 256)
                          : kernels::reference::resize_bilinear(in, 256, 256);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void batch_norm(benchmark::State& state) {
  const Tensor in = noise(Shape{4, 32, 64, 64}, 6);
  const Tensor gamma(Shape{1, 32, 1, 1}, 1.0f);
  const Tensor beta(Shape{1, 32, 1, 1}, 0.0f);
  kernels::ChannelStats stats;
  for (auto _ : state) {
    Tensor out = Parallel ? kernels::batch_norm_train(in, gamma, beta, 1e-5, stats)
                          : kernels::reference::batch_norm_train(in, gamma, beta, 1e-5, stats);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(conv_forward<true>)->Name("conv3x3_forward/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(conv_forward<false>)->Name("conv3x3_forward/reference")->Unit(benchmark::kMillisecond);
BENCHMARK(conv_backward<true>)->Name("conv3x3_backward/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(conv_backward<false>)->Name("conv3x3_backward/reference")->Unit(benchmark::kMillisecond);
BENCHMARK(resize<true>)->Name("resize_64_to_256/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(resize<false>)->Name("resize_64_to_256/reference")->Unit(benchmark::kMillisecond);
BENCHMARK(batch_norm<true>)->Name("batch_norm_train/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(batch_norm<false>)->Name("batch_norm_train/reference")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
