#include "spdregime/models/network.hpp"
#include "spdregime/synth/synth.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace spdregime;

models::LabeledSet batch_of(int n) {
  synth::SynthSpec spec;
  spec.n_series_total = spec.n_assets * n;
  spec.rng_seed = 5;
  models::LabeledSet set;
  for (const auto& s : synth::generate_dataset(spec, synth::FactorSpec{})) {
    set.inputs.push_back(s.corr);
    set.labels.push_back(regimes::to_int(s.regime));
  }
  return set;
}

void run_batch(benchmark::State& state, models::ModelKind kind, bool grads) {
  static const models::LabeledSet set = batch_of(30);
  auto cfg = models::ModelConfig::preset(kind);
  auto net = models::build_model(cfg);
  models::BatchOptions opts;
  opts.compute_grads = grads;
  opts.mode = grads ? models::Mode::Train : models::Mode::Eval;
  for (auto _ : state) benchmark::DoNotOptimize(net->compute_batch(set.inputs, set.labels, opts).loss);
  state.SetItemsProcessed(state.iterations() * static_cast<long>(set.size()));
}

void BM_SpdNetForward(benchmark::State& s) { run_batch(s, models::ModelKind::SPDNet, false); }
void BM_SpdNetForwardBackward(benchmark::State& s) { run_batch(s, models::ModelKind::SPDNet, true); }
void BM_SpdNetBnForwardBackward(benchmark::State& s) { run_batch(s, models::ModelKind::SPDNetBN, true); }
void BM_USpdNetForwardBackward(benchmark::State& s) { run_batch(s, models::ModelKind::USPDNet6BiRe, true); }

BENCHMARK(BM_SpdNetForward)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SpdNetForwardBackward)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SpdNetBnForwardBackward)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_USpdNetForwardBackward)->Unit(benchmark::kMillisecond);

}  // namespace
