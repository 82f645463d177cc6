#include <benchmark/benchmark.h>

#include "rnnbench/model.hpp"

using namespace rnnbench;

namespace {

// Paper-scale speech models: matched ~169k-parameter budgets at d = 20.
constexpr int kInLen = 20;
constexpr int kOutLen = 10;

SequenceBatchItem signal_item(RngStream& rng, int T) {
  SequenceBatchItem item;
  for (int t = 0; t < T; ++t) {
    Vector x(kInLen), y(kOutLen);
    for (double& v : x) v = rng.normal();
    for (double& v : y) v = rng.normal();
    item.inputs.push_back(std::move(x));
    item.targets.push_back(std::move(y));
  }
  return item;
}

int speech_units(CellKind kind) {
  switch (kind) {
    case CellKind::Lstm: return 195;
    case CellKind::Gru: return 227;
    case CellKind::Tanh: return 400;
  }
  return 0;
}

void bench_forward(benchmark::State& state, CellKind kind) {
  RngStream rng(1);
  SequenceModel m = build_model(kind, HeadKind::Gmm, speech_units(kind), kInLen,
                                kOutLen, rng, 1.0, GruVariant::CandidateGated, 20);
  SequenceBatchItem item = signal_item(rng, 48);
  for (auto _ : state) {
    double nll = forward_nll(m, item).total_nll;
    benchmark::DoNotOptimize(nll);
  }
  state.SetItemsProcessed(state.iterations() * 48);
}

void bench_update(benchmark::State& state, CellKind kind) {
  RngStream rng(1);
  SequenceModel m = build_model(kind, HeadKind::Gmm, speech_units(kind), kInLen,
                                kOutLen, rng, 1.0, GruVariant::CandidateGated, 20);
  SequenceBatchItem item = signal_item(rng, 48);
  RngStream noise(2);
  for (auto _ : state) {
    SequenceModel noisy = perturb_weights(m, noise, 0.075);
    auto [grads, nll] = bptt(noisy, item);
    benchmark::DoNotOptimize(grads);
    benchmark::DoNotOptimize(nll);
  }
  state.SetItemsProcessed(state.iterations() * 48);
}

}  // namespace

BENCHMARK_CAPTURE(bench_forward, tanh400, CellKind::Tanh);
BENCHMARK_CAPTURE(bench_forward, gru227, CellKind::Gru);
BENCHMARK_CAPTURE(bench_forward, lstm195, CellKind::Lstm);
BENCHMARK_CAPTURE(bench_update, tanh400, CellKind::Tanh);
BENCHMARK_CAPTURE(bench_update, gru227, CellKind::Gru);
BENCHMARK_CAPTURE(bench_update, lstm195, CellKind::Lstm);

BENCHMARK_MAIN();
