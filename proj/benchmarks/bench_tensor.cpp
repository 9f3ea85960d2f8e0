#include <benchmark/benchmark.h>

#include "ipcnet/rng.hpp"
#include "ipcnet/tensor.hpp"

using namespace ipcnet;
using ad::Tensor;

namespace {

Tensor random(ad::Shape shape, std::uint64_t seed, bool grad = false) {
  CounterRng rng(seed);
  std::vector<double> v(ad::element_count(shape));
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor(std::move(shape), std::move(v), grad);
}

// N points through one shared per-point layer of width C -> C.
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0)), c = static_cast<std::size_t>(state.range(1));
  const Tensor a = random({n, c}, 1), b = random({c, c}, 2);
  ad::NoGradScope no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(ad::matmul(a, b).values().data());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * c * c));
}
BENCHMARK(BM_Matmul)->Args({512, 64})->Args({2048, 64})->Args({2048, 128});

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0)), c = static_cast<std::size_t>(state.range(1));
  Tensor a = random({n, c}, 1, true), b = random({c, c}, 2, true);
  for (auto _ : state) {
    a.zero_grad();
    b.zero_grad();
    ad::sum(ad::matmul(a, b)).backward();
  }
}
BENCHMARK(BM_MatmulBackward)->Args({512, 64})->Args({2048, 64});

// Inter-point convolution over an H x W x C feature image.
void BM_ConvValid(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0)), k = static_cast<std::size_t>(state.range(1));
  const Tensor in = random({h, 64, 1}, 3), w = random({k, k, 1, 8}, 4), bias = random({8}, 5);
  ad::NoGradScope no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(ad::conv_valid(in, w, bias, k, 1).values().data());
}
BENCHMARK(BM_ConvValid)->Args({2048, 10})->Args({512, 3});

void BM_Maxpool(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  const Tensor in = random({h, 64, 8}, 6);
  ad::NoGradScope no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(ad::maxpool(in, 5, 2, 5, 2).values().data());
}
BENCHMARK(BM_Maxpool)->Arg(200)->Arg(2000);

}  // namespace
