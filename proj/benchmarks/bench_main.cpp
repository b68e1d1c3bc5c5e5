#include <benchmark/benchmark.h>

#include "mcdrop/inference.hpp"
#include "mcdrop/training.hpp"

using namespace mcdrop;

namespace {

Tensor2 random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor2 m(r, c);
  for (double &v : m.mutable_data()) v = rng.normal(0, 1);
  return m;
}

Network boston_shaped(double p) {
  MlpShape s;
  s.input_width = 13;
  s.width = 50;
  s.retain_prob = p;
  return init_network(s, 1);
}

void BM_Matmul(benchmark::State &state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor2 a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_TrainingEpoch(benchmark::State &state) {
  const Dataset data(random_matrix(455, 13, 3), random_matrix(455, 1, 4));
  const HyperParams hp = HyperParams::from_tau(0.9, 0.1, 1.0, data.size());
  TrainConfig tc;
  tc.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train(boston_shaped(0.9), data, hp, tc));
}
BENCHMARK(BM_TrainingEpoch)->Unit(benchmark::kMillisecond);

void BM_McPredict(benchmark::State &state) {
  const Network net = boston_shaped(0.9);
  const Tensor2 q = random_matrix(51, 13, 5);
  Rng rng(6);
  const auto T = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mc_predict(net, q, T, 0.1, rng));
}
BENCHMARK(BM_McPredict)->Arg(50)->Arg(1000)->Unit(benchmark::kMicrosecond);

void BM_LogLikelihood(benchmark::State &state) {
  const Tensor2 s = random_matrix(1000, 51, 7);
  const Tensor2 y = random_matrix(51, 1, 8);
  for (auto _ : state) benchmark::DoNotOptimize(mc_log_likelihood(s, 2.0, y.data()));
}
BENCHMARK(BM_LogLikelihood);

} // namespace

BENCHMARK_MAIN();
