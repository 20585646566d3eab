#include <benchmark/benchmark.h>

#include "wbt/branching.hpp"
#include "wbt/graphs.hpp"
#include "wbt/measures.hpp"

namespace {

wbt::EmpiricalMeasure cloud(std::size_t n, std::size_t dim, std::uint64_t seed) {
  wbt::RandomStream rs{wbt::StreamKey(seed)};
  std::vector<double> v(n * dim);
  for (auto& x : v) x = rs.uniform();
  return wbt::EmpiricalMeasure(dim, std::move(v));
}

void BM_Assignment(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = cloud(n, 3, 1), y = cloud(n, 3, 2);
  for (auto _ : state) benchmark::DoNotOptimize(wbt::d1_empirical_l1(x, y));
}
BENCHMARK(BM_Assignment)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_QuantileD1(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = cloud(n, 1, 1), y = cloud(n, 1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(wbt::d1_empirical_1d(x, y));
}
BENCHMARK(BM_QuantileD1)->Arg(1 << 10)->Arg(1 << 16);

void BM_GrowPoisson(benchmark::State& state) {
  const auto s = wbt::BranchingSampler::independent(wbt::TreeMode::wbp, wbt::Distribution::point(1.0),
                                                    wbt::Distribution(wbt::Poisson{1.5, std::nullopt}),
                                                    wbt::Distribution::uniform(0, 1));
  const auto depth = static_cast<std::size_t>(state.range(0));
  std::uint64_t i = 0;
  for (auto _ : state) {
    const auto t = wbt::grow(s, std::nullopt, wbt::StreamKey(7).child(i++), wbt::GrowOptions{depth});
    benchmark::DoNotOptimize(t.w(depth));
  }
}
BENCHMARK(BM_GrowPoisson)->Arg(6)->Arg(10);

void BM_ConfigModel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto ds = wbt::sample_degrees(wbt::Distribution(wbt::Geometric{0.5, 1}), n, wbt::StreamKey(3));
  if (ds.total() % 2 == 1) ++ds.degrees.front();
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(wbt::config_model(ds, wbt::StreamKey(4).child(i++)));
}
BENCHMARK(BM_ConfigModel)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_PageRank(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto ds = wbt::sample_bidegrees(wbt::Distribution(wbt::Geometric{0.5, 1}),
                                        wbt::Distribution(wbt::Geometric{0.5, 1}), n, wbt::StreamKey(5));
  const auto g = wbt::config_model(ds, wbt::StreamKey(6));
  for (auto _ : state) benchmark::DoNotOptimize(wbt::pagerank(g).ranks);
}
BENCHMARK(BM_PageRank)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
