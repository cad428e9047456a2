// Serial reference vs OpenMP kernels. Each benchmark takes the execution mode
// as its first argument: 0 serial, 1 parallel.

#include <benchmark/benchmark.h>

#include <random>

#include "uwbcount/features.hpp"
#include "uwbcount/learn.hpp"
#include "uwbcount/preprocess.hpp"
#include "uwbcount/radar_sim.hpp"

using namespace uwbcount;

namespace {

Execution mode(const benchmark::State& state) { return state.range(0) ? Execution::Parallel : Execution::Serial; }

Matrix noise(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (double& v : m.values()) v = g(rng);
  return m;
}

std::vector<RadarMatrix> raw_samples(int n) {
  std::vector<RadarMatrix> out;
  for (int r = 0; static_cast<int>(out.size()) < n; ++r) {
    const auto rec = synthesize_record(generate_scene(Scenario::Walk3, 1 + r % 20, r), RadarConfig{}, r);
    for (auto& s : slice_samples(rec)) out.push_back(std::move(s));
  }
  out.resize(static_cast<std::size_t>(n));
  return out;
}

void BM_CurveletForward(benchmark::State& state) {
  const Matrix m = noise(50, 1280, 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward(m, {}, mode(state)));
}
BENCHMARK(BM_CurveletForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_Bandpass(benchmark::State& state) {
  const RadarMatrix m{noise(50, 1280, 2), Stage::Raw, {}};
  const FilterConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(bandpass_filter(m, cfg, mode(state)));
}
BENCHMARK(BM_Bandpass)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_ExtractBatch(benchmark::State& state) {
  const auto raws = raw_samples(16);
  const FeatureConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(extract_batch(raws, cfg, mode(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(raws.size()));
}
BENCHMARK(BM_ExtractBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_ForestTrain(benchmark::State& state) {
  LabeledDataset data;
  data.features = noise(400, 294, 3);
  std::mt19937_64 rng(4);
  for (std::size_t r = 0; r < 400; ++r) {
    const int label = static_cast<int>(r % 11);
    data.labels.push_back(label);
    for (std::size_t j = 0; j < 294; j += 7) data.features(r, j) += 0.5 * label;
  }
  auto cfg = ClassifierConfig::defaults(ClassifierKind::RandomForest);
  cfg.trees = 50;
  for (auto _ : state) benchmark::DoNotOptimize(train(cfg, data, mode(state)));
}
BENCHMARK(BM_ForestTrain)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
