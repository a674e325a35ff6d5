// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include <random>

#include "annpricer/autodiff.hpp"
#include "annpricer/dataset.hpp"
#include "annpricer/network.hpp"
#include "annpricer/penalty.hpp"
#include "annpricer/trainer.hpp"

using namespace annp;

namespace {

struct Fixture {
  Network net = Network::pricing_architecture();
  DirectData data;
  std::vector<Direction> dirs{{0, true}, {1, false}};

  explicit Fixture(std::size_t n) {
    net.initialize(3);
    data = scale_direct(generate(n, SamplingRanges{}, 11));
  }
};

Fixture& fixture() {
  static Fixture f(4096);
  return f;
}

void BM_ForwardJetParallel(benchmark::State& st) {
  auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(forward_jet(f.net, f.data.train.X, f.dirs));
}

void BM_ForwardJetSerial(benchmark::State& st) {
  auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(serial::forward_jet(f.net, f.data.train.X, f.dirs));
}

JetKernel penalty_kernel(const Fixture& f) {
  const auto pcfg = PenaltyConfig::uniform(10.0, 4);
  return penalized_kernel(f.data.train.X, f.data.train.y, f.data.train.strike, f.data.scaling.shift, pcfg,
                          static_cast<double>(f.data.train.size()), nullptr);
}

void BM_PenaltyGradientParallel(benchmark::State& st) {
  auto& f = fixture();
  const auto k = penalty_kernel(f);
  for (auto _ : st) benchmark::DoNotOptimize(jet_gradient(f.net, f.data.train.X, f.dirs, k));
}

void BM_PenaltyGradientSerial(benchmark::State& st) {
  auto& f = fixture();
  const auto k = penalty_kernel(f);
  for (auto _ : st) benchmark::DoNotOptimize(serial::jet_gradient(f.net, f.data.train.X, f.dirs, k));
}

void BM_GenerateParallel(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(generate(100000, SamplingRanges{}, 5));
}

void BM_GenerateSerial(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(generate_serial(100000, SamplingRanges{}, 5));
}

}  // namespace

BENCHMARK(BM_ForwardJetParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardJetSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PenaltyGradientParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PenaltyGradientSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GenerateParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GenerateSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
