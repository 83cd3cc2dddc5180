#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>

#include "lossprobe/analysis.hpp"
#include "lossprobe/perturb.hpp"
#include "lossprobe/rng.hpp"
#include "lossprobe/signal.hpp"
#include "lossprobe/stats.hpp"
#include "lossprobe/toymodel.hpp"

namespace {

using namespace lossprobe;

struct Toy {
  std::vector<TokenSequence> corpus;
  toy::NGramModel model;
};

const Toy& toy_setup() {
  static const Toy t = [] {
    toy::CorpusConfig cfg;
    cfg.repeats_per_seq = 94;
    cfg.n_sequences = 200;
    auto corpus = toy::gen_corpus(cfg);
    auto model = toy::train_ngram(corpus, 4, 0.1);
    return Toy{std::move(corpus), std::move(model)};
  }();
  return t;
}

void BM_NgramScore(benchmark::State& state) {
  const auto& t = toy_setup();
  const auto& seq = t.corpus.front();
  for (auto _ : state) benchmark::DoNotOptimize(t.model.token_nll(seq.tokens()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(seq.size()));
}
BENCHMARK(BM_NgramScore);

void BM_Train(benchmark::State& state) {
  const auto& t = toy_setup();
  for (auto _ : state) benchmark::DoNotOptimize(toy::train_ngram(t.corpus, 4, 0.1));
}
BENCHMARK(BM_Train)->Unit(benchmark::kMillisecond);

void BM_Perturb(benchmark::State& state) {
  const auto& seq = toy_setup().corpus.front();
  PerturbationSpec spec;
  spec.window = {250, static_cast<std::size_t>(state.range(0))};
  spec.noise_mode = NoiseMode::iid_uniform;
  spec.noise_vocab = {64, 65, 66, 67};
  for (auto _ : state) benchmark::DoNotOptimize(apply_perturbation(seq, spec));
}
BENCHMARK(BM_Perturb)->Arg(5)->Arg(200);

std::vector<double> spike_profile(std::size_t n) {
  std::vector<double> v(n, 0.0);
  for (std::size_t i = 250; i < 450 && i < n; ++i) v[i] = i < 255 ? 5.0 : -0.5;
  return v;
}

void BM_MovingAverage(benchmark::State& state) {
  const auto v = spike_profile(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(analysis::moving_average(v, 5));
}
BENCHMARK(BM_MovingAverage)->Arg(750)->Arg(100000);

void BM_DetectRegions(benchmark::State& state) {
  const auto v = spike_profile(750);
  const analysis::DetectorParams params;
  for (auto _ : state) benchmark::DoNotOptimize(analysis::detect_regions(v, {250, 200}, params));
}
BENCHMARK(BM_DetectRegions);

void BM_SpearmanExact(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  std::vector<double> x, y;
  for (std::size_t i = 0; i < n; ++i) {
    x.push_back(static_cast<double>(i));
    y.push_back(rng.uniform01());
  }
  for (auto _ : state) benchmark::DoNotOptimize(stats::spearman(x, y));
}
BENCHMARK(BM_SpearmanExact)->DenseRange(6, 10, 2)->Unit(benchmark::kMicrosecond);

void BM_MatchLoudness(benchmark::State& state) {
  signal::AudioSignal ref;
  for (int i = 0; i < 320000; ++i) ref.samples.push_back(0.3 * std::sin(i * 0.01));
  const auto noise = signal::white_noise(64000, 1);
  for (auto _ : state) benchmark::DoNotOptimize(signal::match_loudness(noise, ref, {-20.0}));
}
BENCHMARK(BM_MatchLoudness)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
