#include <benchmark/benchmark.h>

#include <random>

#include "classnet/amen.hpp"
#include "classnet/centrality.hpp"
#include "classnet/classification.hpp"

using namespace classnet;

namespace {

Eigen::MatrixXd random_weights(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::poisson_distribution<int> pois(1.5);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) w(i, j) = pois(rng);
  return w;
}

void BM_CentralityAll(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Eigen::MatrixXd w = random_weights(n, 7);
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
  for (auto _ : state) benchmark::DoNotOptimize(centrality::compute_all(ids, w));
}
BENCHMARK(BM_CentralityAll)->Arg(20)->Arg(60)->Arg(150);

void BM_PageRank(benchmark::State& state) {
  Eigen::MatrixXd w = random_weights(static_cast<int>(state.range(0)), 11);
  for (auto _ : state) benchmark::DoNotOptimize(centrality::pagerank(w));
}
BENCHMARK(BM_PageRank)->Arg(20)->Arg(150);

// Short fits; items/s is sweeps per second.
void BM_AmenSweeps(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  auto truth = amen::random_state(n, 2, 0.5, 0.7, std::log(5.0), rng);
  Eigen::MatrixXd y = amen::simulate(truth, rng);
  amen::AmenConfig c;
  c.dim = 2;
  c.iterations = 50;
  c.burn_in = 10;
  for (auto _ : state) benchmark::DoNotOptimize(amen::fit_chain(y, c, 0));
  state.SetItemsProcessed(state.iterations() * c.iterations);
}
BENCHMARK(BM_AmenSweeps)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_AmenGradient(benchmark::State& state) {
  std::mt19937_64 rng(5);
  auto truth = amen::random_state(20, 3, 0.5, 0.7, std::log(5.0), rng);
  Eigen::MatrixXd y = amen::simulate(truth, rng);
  for (auto _ : state) benchmark::DoNotOptimize(amen::grad_log_posterior(y, truth, {}));
}
BENCHMARK(BM_AmenGradient);

void BM_Voting(benchmark::State& state) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> pick(0, 4);
  std::vector<BackendDescriptor> desc;
  for (int m = 0; m < 7; ++m) {
    desc.push_back({"m" + std::to_string(m), m < 4 ? Tier::Commercial : Tier::OpenSource, m + 1, {}});
  }
  std::vector<std::map<std::string, FineLabel>> sets(1000);
  for (auto& s : sets)
    for (const auto& d : desc) s[d.model_id] = kAllLabels[static_cast<std::size_t>(pick(rng))];
  for (auto _ : state) {
    for (const auto& s : sets) benchmark::DoNotOptimize(aggregate_votes(s, desc));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(sets.size()));
}
BENCHMARK(BM_Voting);

}  // namespace

BENCHMARK_MAIN();
