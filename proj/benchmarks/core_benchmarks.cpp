#include <benchmark/benchmark.h>

#include "csphhn/granger.hpp"
#include "csphhn/model.hpp"
#include "csphhn/synthgen.hpp"
#include "csphhn/training.hpp"
#include "csphhn/vmf.hpp"

namespace csphhn {
namespace {

void BM_VmfEntropy(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  double kappa = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(vmf::entropy(dim, kappa));
    kappa = kappa < 200.0 ? kappa * 1.1 : 0.5;
  }
}
BENCHMARK(BM_VmfEntropy)->Arg(3)->Arg(64);

void BM_GrangerGraph(benchmark::State& state) {
  const synth::SynthResult sr = synth::generate(synth::preset("toy"));
  granger::GrangerConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        granger::infer_causal_graph(sr.dataset, cfg, granger::FeatureReduction::kPca1, 1));
  }
}
BENCHMARK(BM_GrangerGraph)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const synth::SynthResult sr = synth::generate(synth::preset("small"));
  const Dataset& ds = sr.dataset;
  const granger::CausalGraph graph = granger::infer_causal_graph(
      ds, granger::GrangerConfig{}, granger::FeatureReduction::kPca1, 1);
  const ModelConfig mc = model_config_for(ds, 64, 2);
  Rng rng = make_rng(0, "bench");
  const ModelParams params = ModelParams::Init(mc, rng);
  const ModelInputs inputs = make_model_inputs(ds, &graph, mc, model_context_types(ds));
  const TrainConfig tc;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        gradients(inputs, params, mc, ds.labels, ds.splits.train, tc, Mode::kTrain, &rng));
  }
}
BENCHMARK(BM_ForwardBackward)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace csphhn

BENCHMARK_MAIN();
