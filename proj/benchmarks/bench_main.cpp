#include <benchmark/benchmark.h>

#include "rtdnas/decode.hpp"
#include "rtdnas/gradient.hpp"
#include "rtdnas/search.hpp"

using namespace rtdnas;

namespace {

SkeletonConfig skeleton(int layers, int scales) {
  SkeletonConfig cfg;
  cfg.n_layers = layers;
  cfg.n_scales = scales;
  cfg.n_tensors = 3;
  cfg.scaling_latency = {0.6, 0.1, 0.4};
  std::vector<double> base = {2.0, 1.2, 0.2};
  const char* ids[] = {"sep_conv3x3", "dil_conv3x3", "skip"};
  for (int o = 0; o < 3; ++o) {
    std::vector<double> lat;
    for (int s = 0; s < scales; ++s) lat.push_back(base[o] / (1 << s));
    cfg.ops.push_back({ids[o], ids[o], 1.0 - 0.4 * o, lat});
  }
  return cfg;
}

struct Instance {
  SupernetTopology topology;
  SurrogateModel surrogate;
  LatencyModel latency;
  ArchParams params;

  Instance(int layers, int scales)
      : topology(build_topology(skeleton(layers, scales))),
        surrogate(generate_surrogate(topology, SurrogateGenerator{})),
        latency(LatencyModel::from_topology(topology)),
        params(init_arch_params(topology, {InitPolicy::uniform_noise, 0.5}, 3)) {}
};

void BM_LossAndGradient(benchmark::State& state) {
  const Instance inst(static_cast<int>(state.range(0)), 4);
  const LossConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_loss_and_gradient(inst.params, inst.topology, inst.surrogate, inst.latency, cfg));
  }
  state.counters["coefficients"] = static_cast<double>(inst.topology.param_count());
}
BENCHMARK(BM_LossAndGradient)->Arg(4)->Arg(10);

void BM_ExpectedNetworkLatency(benchmark::State& state) {
  const Instance inst(static_cast<int>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(expected_network_latency(inst.topology, inst.params, inst.latency));
}
BENCHMARK(BM_ExpectedNetworkLatency)->Arg(4)->Arg(10);

void BM_TopK(benchmark::State& state) {
  const Instance inst(10, 4);
  for (auto _ : state) benchmark::DoNotOptimize(decode_topk_paths(inst.topology, inst.params, state.range(0)));
}
BENCHMARK(BM_TopK)->Arg(1)->Arg(10)->Arg(100);

void BM_Evolve(benchmark::State& state) {
  const Instance inst(10, 4);
  const auto sel = argmax_selections(inst.topology, mixture_weights(inst.params, inst.topology));
  const auto pool = build_gene_pool(inst.topology, inst.params, 10, sel, inst.latency);
  const FitnessEvaluator eval(inst.topology, pool, sel, inst.latency);
  const GaConfig cfg;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(evolve(pool, static_cast<std::size_t>(state.range(0)), cfg, eval, 50.0, ++seed));
  }
}
BENCHMARK(BM_Evolve)->Arg(3)->Arg(7);

void BM_SearchEpoch(benchmark::State& state) {
  const Instance inst(4, 3);
  OptimizerConfig opt;
  opt.epochs = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_search(inst.topology, inst.surrogate, inst.latency, LossConfig{}, opt, 1));
  }
}
BENCHMARK(BM_SearchEpoch);

}  // namespace

BENCHMARK_MAIN();
