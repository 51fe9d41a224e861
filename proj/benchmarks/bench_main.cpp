#include <benchmark/benchmark.h>

#include <numeric>

#include "cts/classify.hpp"
#include "cts/logging.hpp"
#include "cts/metrics.hpp"
#include "cts/pairgen.hpp"
#include "cts/rng.hpp"
#include "cts/specialize.hpp"

using namespace cts;

namespace {

RowMatrixF random_rows(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  RowMatrixF m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal());
  return m;
}

std::vector<LabelId> random_labels(std::size_t n, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabelId> out(n);
  for (auto& l : out) l = static_cast<LabelId>(rng.uniform_index(classes));
  return out;
}

void BM_HeadEncode(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  HeadF head(dim);
  head.weight() = random_rows(dim, dim, 1) * 0.01f;
  const auto x = random_rows(256, dim, 2);
  for (auto _ : state) benchmark::DoNotOptimize(head.encode(x));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_HeadEncode)->Arg(32)->Arg(768);

void BM_PairGenMultiClass(benchmark::State& state) {
  const auto labels = random_labels(static_cast<std::size_t>(state.range(0)), 8, 3);
  for (auto _ : state) benchmark::DoNotOptimize(generate_pairs_multiclass(labels, {kLowSetupIterations, 4, false}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PairGenMultiClass)->Arg(1000)->Arg(10000);

void BM_OclStep(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto x = random_rows(128, dim, 5);
  std::vector<SentencePair> batch;
  Rng rng(6);
  for (int i = 0; i < 64; ++i)
    batch.push_back({static_cast<std::uint32_t>(rng.uniform_index(128)), static_cast<std::uint32_t>(rng.uniform_index(128)),
                     i % 2 ? Polarity::negative : Polarity::positive});
  const HeadF head(dim);
  HeadGradient<float> grad;
  for (auto _ : state) benchmark::DoNotOptimize(ocl_objective(head, x, std::span<const SentencePair>(batch), 0.5, &grad));
}
BENCHMARK(BM_OclStep)->Arg(32)->Arg(768);

void BM_MlpTrainEpoch(benchmark::State& state) {
  const auto x = random_rows(512, 768, 7);
  std::vector<LabelSet> y;
  for (const auto l : random_labels(512, 10, 8)) y.push_back({l});
  ClassifierConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(train_classifier(x.topRows(448), std::span<const LabelSet>(y).first(448),
                                              x.bottomRows(64), std::span<const LabelSet>(y).last(64), 10,
                                              TaskKind::multi_class, cfg));
}
BENCHMARK(BM_MlpTrainEpoch)->Unit(benchmark::kMillisecond);

void BM_F1(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<LabelSet> p, g;
  const auto a = random_labels(n, 10, 9), b = random_labels(n, 10, 10);
  for (std::size_t i = 0; i < n; ++i) {
    p.push_back({a[i]});
    g.push_back({b[i]});
  }
  for (auto _ : state) benchmark::DoNotOptimize(f1_scores(p, g, 10, TaskKind::multi_class));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_F1)->Arg(1000)->Arg(100000);

void BM_PermutationTest(benchmark::State& state) {
  Rng rng(11);
  std::vector<double> a(20), b(20);
  for (std::size_t i = 0; i < 20; ++i) {
    a[i] = rng.uniform01();
    b[i] = rng.uniform01();
  }
  for (auto _ : state) benchmark::DoNotOptimize(paired_permutation_test(a, b, kDefaultPermutationResamples, 12));
}
BENCHMARK(BM_PermutationTest)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
