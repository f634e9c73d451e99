#include <benchmark/benchmark.h>

#include <vector>

#include "emt/functions.hpp"
#include "emt/networks.hpp"
#include "emt/nn.hpp"
#include "emt/operators.hpp"
#include "emt/rng.hpp"
#include "emt/stats.hpp"

namespace {

using namespace emt;

void fill_uniform(Tensor& t, Rng& rng) {
  for (double& v : t.values()) v = rng.uniform();
}

// Args: channels, batch, spatial size.
void BM_Conv2dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto b = static_cast<std::size_t>(state.range(1));
  const auto d = static_cast<std::size_t>(state.range(2));
  Rng rng(1);
  Conv2d conv(c, c);
  conv.init_he(rng);
  Tensor x({c, b, d, d});
  fill_uniform(x, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(b));
}
BENCHMARK(BM_Conv2dForward)->Args({16, 20, 10})->Args({64, 20, 10})->Args({16, 20, 50});

void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const std::size_t b = 20, d = 10;
  Rng rng(2);
  Conv2d conv(c, c);
  conv.init_he(rng);
  Tensor x({c, b, d, d}), g({c, b, d, d}), gi({c, b, d, d});
  fill_uniform(x, rng);
  fill_uniform(g, rng);
  for (auto _ : state) {
    conv.backward(x, g, &gi);
    benchmark::DoNotOptimize(gi.values().data());
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(16)->Arg(64);

// Args: dimension, hidden channels.
void BM_VdsrForward(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto h = static_cast<std::size_t>(state.range(1));
  Rng rng(3);
  ResidualNet net(d, ResidualNet::kDefaultDepth, h);
  net.init(rng);
  std::vector<double> x(d);
  for (double& v : x) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(vdsr_forward(net, x));
}
BENCHMARK(BM_VdsrForward)->Args({10, 16})->Args({10, 64})->Args({50, 16});

void BM_BaseFunction(benchmark::State& state) {
  const auto kind = static_cast<FunctionKind>(state.range(0));
  Rng rng(4);
  std::vector<double> z(50);
  for (double& v : z) v = rng.uniform(-1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_base(kind, z));
}
BENCHMARK(BM_BaseFunction)->DenseRange(0, 6);

void BM_Sbx(benchmark::State& state) {
  Rng rng(5);
  std::vector<double> p1(50), p2(50);
  for (double& v : p1) v = rng.uniform();
  for (double& v : p2) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(sbx_crossover_unclamped(p1, p2, 2.0, rng));
}
BENCHMARK(BM_Sbx);

// Arg: sample size per group; 6 exercises exact enumeration, 30 the normal approximation.
void BM_Wilcoxon(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(6);
  std::vector<double> a(n), b(n);
  for (double& v : a) v = rng.normal();
  for (double& v : b) v = rng.normal(0.5, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(wilcoxon_rank_sum(a, b));
}
BENCHMARK(BM_Wilcoxon)->Arg(6)->Arg(30);

}  // namespace
BENCHMARK_MAIN();
