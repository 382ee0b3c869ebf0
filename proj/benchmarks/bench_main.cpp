#include <benchmark/benchmark.h>

#include "noisyembed/datagen.hpp"
#include "noisyembed/metrics.hpp"
#include "noisyembed/noise.hpp"
#include "noisyembed/optimizer.hpp"
#include "noisyembed/risk.hpp"
#include "noisyembed/sampling.hpp"

using namespace noisyembed;

namespace {

LabeledPointSet default_data() {
  SynthSpec s;
  s.seed = 1;
  return inject_noise(generate(s), {0.2, s.num_classes, 2});
}

void BM_Minibatch(benchmark::State& state) {
  const auto set = default_data();
  const auto emb = initialize_embeddings(set.size(), 16, {InitMode::random_uniform_sphere, 3, 0.0});
  LossConfig cfg;
  cfg.mining = static_cast<Mining>(state.range(0));
  CounterRng rng(4);
  for (auto _ : state) {
    auto mb = build_minibatch_triplets(ObservedLabels::of(set), emb, {10, 5, 0}, cfg, rng);
    benchmark::DoNotOptimize(mb.triplets.data());
  }
}
BENCHMARK(BM_Minibatch)->Arg(0)->Arg(1)->Arg(2);

void BM_TrainSteps(benchmark::State& state) {
  const auto set = default_data();
  const auto init = initialize_embeddings(set.size(), 16, {InitMode::random_uniform_sphere, 3, 0.0});
  TrainConfig tc;
  tc.steps = static_cast<std::size_t>(state.range(0));
  tc.minibatch = {10, 5, 0};
  for (auto _ : state) benchmark::DoNotOptimize(train(ObservedLabels::of(set), init, tc).state.data().data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainSteps)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Recall(benchmark::State& state) {
  const auto set = default_data();
  const EmbeddingState emb(set.feature_dim, set.features);
  const std::vector<int> ks{1, 10};
  for (auto _ : state) benchmark::DoNotOptimize(recall_at_k(emb, set.true_labels, ks));
}
BENCHMARK(BM_Recall)->Unit(benchmark::kMillisecond);

void BM_KMeans(benchmark::State& state) {
  const auto set = default_data();
  const EmbeddingState emb(set.feature_dim, set.features);
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(emb, 10, static_cast<int>(state.range(0)), 1).inertia);
}
BENCHMARK(BM_KMeans)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_TripletBound(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(solve_triplet_bound(static_cast<int>(state.range(0)), 2.0).p_star);
}
BENCHMARK(BM_TripletBound)->Arg(10)->Arg(1000);

void BM_MonteCarloNoise(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(monte_carlo_pair_noise({0.3, 10, 1}, 100000).q_pos);
  state.SetItemsProcessed(state.iterations() * 200000);
}
BENCHMARK(BM_MonteCarloNoise)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
