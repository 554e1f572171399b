#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace rtdnas;
using testing::op;
using testing::skeleton;

namespace {

std::vector<CellSelection> random_selections(const SupernetTopology& t, Rng& rng) {
  std::vector<CellSelection> sel(t.n_cells());
  for (auto& s : sel) {
    for (int i = 1; i <= t.n_tensors(); ++i) s.push_back({static_cast<int>(rng.index(i)), rng.index(t.n_ops())});
  }
  return sel;
}

std::size_t differing(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::vector<std::size_t> diff;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
  return diff.size();
}

SupernetTopology wide_topology() {
  auto cfg = skeleton(4, 3, 2, {op("a", {3.0, 1.5, 0.75}), op("b", {1.0, 0.5, 0.25}), op("skip", {0.1, 0.05, 0.02})});
  cfg.scaling_latency = {1.0, 0.3, 0.8};
  return build_topology(cfg);
}

}  // namespace

TEST_SUITE("decode") {
  TEST_CASE("path weight: chain is log 1, symmetric forks give L log 0.5") {
    const auto chain = build_topology(skeleton(4, 1, 1, {op("a", {1})}));
    Rng rng(1);
    const auto p = oracle::random_params(chain, rng, 1.0);
    CHECK(path_weight(chain, enumerate_paths(chain).front(), p) == 0.0);

    // input feeds two layer-1 cells, each layer-l cell feeds two layer-(l+1) cells, all feed the output
    const int L = 3;
    std::vector<CellTemplate> cells;
    std::vector<Transition> edges;
    for (int l = 1; l <= L; ++l) {
      cells.push_back({l, 0, CellType::non_scaling, 1, 0.0});
      cells.push_back({l, 1, CellType::non_scaling, 1, 0.0});
    }
    edges.push_back({0, 1});
    edges.push_back({0, 2});
    for (int l = 1; l < L; ++l) {
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) edges.push_back({static_cast<NodeId>(2 * l - 1 + a), static_cast<NodeId>(2 * l + 1 + b)});
      }
    }
    edges.push_back({2 * L - 1, 2 * L + 1});
    edges.push_back({2 * L, 2 * L + 1});
    const auto fork = SupernetTopology::assemble(L, 2, 1, {op("a", {1.0, 1.0})}, cells, edges);
    const ArchParams zero(fork, std::vector<double>(fork.param_count(), 0.0));
    for (const auto& path : enumerate_paths(fork)) CHECK(path_weight(fork, path, zero) == doctest::Approx(L * std::log(0.5)));
  }

  TEST_CASE("path probabilities sum to one") {
    Rng rng(40);
    for (int trial = 0; trial < 50; ++trial) {
      const auto t = oracle::random_topology(rng);
      const auto p = oracle::random_params(t, rng, 2.0);
      double sum = 0.0;
      for (const auto& path : enumerate_paths(t)) sum += std::exp(path_weight(t, path, p));
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }

  TEST_CASE("top-k equals the exhaustive ranking") {
    Rng rng(41);
    for (int trial = 0; trial < 60; ++trial) {
      const auto t = oracle::random_topology(rng);
      const auto p = oracle::random_params(t, rng, 1.5);
      const auto ranked = oracle::ranked_paths(t, p);
      const auto top1 = decode_topk_paths(t, p, 1);
      CHECK(top1.front().cells == ranked.front().second);
      const std::size_t k = 1 + rng.index(ranked.size());
      const auto got = decode_topk_paths(t, p, k);
      REQUIRE(got.size() == k);
      for (std::size_t r = 0; r < k; ++r) {
        CHECK(got[r].cells == ranked[r].second);
        CHECK(std::abs(got[r].weight - ranked[r].first) < 1e-12);
      }
      const auto all = decode_topk_paths(t, p, ranked.size());
      for (std::size_t r = 1; r < all.size(); ++r) CHECK(all[r].weight <= all[r - 1].weight);
      CHECK_THROWS_AS(decode_topk_paths(t, p, ranked.size() + 1), PathLimitExceeded);
    }
  }

  TEST_CASE("top-k ties fall back to cell ids") {
    const auto t = wide_topology();
    const ArchParams zero(t, std::vector<double>(t.param_count(), 0.0));
    const auto got = decode_topk_paths(t, zero, 8);
    const auto ranked = oracle::ranked_paths(t, zero);
    for (std::size_t r = 0; r < got.size(); ++r) CHECK(got[r].cells == ranked[r].second);
  }

  TEST_CASE("gene pool: capacity genes in weight order with latencies") {
    const auto t = wide_topology();
    Rng rng(42);
    const auto p = oracle::random_params(t, rng, 1.0);
    const auto sel = random_selections(t, rng);
    const auto lm = LatencyModel::from_topology(t);
    const auto pool = build_gene_pool(t, p, 10, sel, lm);
    REQUIRE(pool.size() == 10);
    for (std::size_t g = 1; g < pool.size(); ++g) CHECK(pool.genes[g].weight <= pool.genes[g - 1].weight);
    for (const auto& g : pool.genes) CHECK(g.latency_ms == doctest::Approx(path_latency(t, g.cells, sel, lm)));

    const auto single = build_gene_pool(t, p, 1, sel, lm);
    CHECK(single.size() == 1);
    const FitnessEvaluator eval(t, single, sel, lm);
    GaConfig cfg;
    cfg.pool_capacity = 1;
    const auto r = evolve(single, 1, cfg, eval, 1e9, 3);
    CHECK(r.best.genes == std::vector<std::size_t>{0});
  }

  TEST_CASE("fitness matches the set-union oracle") {
    const auto t = wide_topology();
    Rng rng(43);
    const auto p = oracle::random_params(t, rng, 1.0);
    const auto sel = random_selections(t, rng);
    const auto lm = LatencyModel::from_topology(t);
    const auto pool = build_gene_pool(t, p, 10, sel, lm);
    const FitnessEvaluator eval(t, pool, sel, lm);
    for (int k = 0; k < 200; ++k) {
      std::vector<std::size_t> genes;
      for (std::size_t g = 0; g < 10; ++g) {
        if (rng.uniform() < 0.4) genes.push_back(g);
      }
      if (genes.empty()) continue;
      std::vector<CellPath> paths;
      for (std::size_t g : genes) paths.push_back(pool.genes[g].cells);
      CHECK(std::abs(eval.latency(genes) - oracle::set_union_latency(t, paths, sel, lm)) < 1e-9);
    }
  }

  TEST_CASE("crossover: identical parents and the worked example") {
    auto [a, b] = crossover_genes(std::vector<std::size_t>{1, 4, 6}, std::vector<std::size_t>{1, 4, 6}, 1);
    CHECK(a == std::vector<std::size_t>{1, 4, 6});
    CHECK(b == std::vector<std::size_t>{1, 4, 6});
    auto [c, d] = crossover_genes(std::vector<std::size_t>{0, 1, 2}, std::vector<std::size_t>{3, 4, 5}, 1);
    CHECK(c == std::vector<std::size_t>{0, 4, 5});
    CHECK(d == std::vector<std::size_t>{1, 2, 3});
  }

  TEST_CASE("random crossovers and mutations keep individuals valid") {
    const auto t = wide_topology();
    Rng rng(44);
    const auto p = oracle::random_params(t, rng, 1.0);
    const auto sel = random_selections(t, rng);
    const auto lm = LatencyModel::from_topology(t);
    const auto pool = build_gene_pool(t, p, 10, sel, lm);
    const FitnessEvaluator eval(t, pool, sel, lm);
    auto random_individual = [&](std::size_t n) {
      std::vector<std::size_t> all(10);
      for (std::size_t g = 0; g < 10; ++g) all[g] = g;
      for (std::size_t g = 0; g < n; ++g) std::swap(all[g], all[g + rng.index(10 - g)]);
      all.resize(n);
      std::sort(all.begin(), all.end());
      return make_individual(all, eval, 20.0);
    };
    for (int k = 0; k < 10000; ++k) {
      const std::size_t n = 2 + rng.index(8);
      const auto a = random_individual(n);
      const auto b = random_individual(n);
      const auto [c1, c2] = crossover(a, b, rng, eval, 20.0);
      CHECK(is_valid_individual(c1, n, 10));
      CHECK(is_valid_individual(c2, n, 10));
      CHECK(c1.fitness_latency_ms == doctest::Approx(eval.latency(c1.genes)));
      const auto m = mutate(a, 10, rng, eval, 20.0);
      CHECK(m.mutated);
      CHECK(is_valid_individual(m.individual, n, 10));
      CHECK(differing(a.genes, m.individual.genes) == 1);
    }
  }

  TEST_CASE("mutation with one absent gene swaps it in; a full individual cannot mutate") {
    const auto t = wide_topology();
    Rng rng(45);
    const auto p = oracle::random_params(t, rng, 1.0);
    const auto sel = random_selections(t, rng);
    const auto lm = LatencyModel::from_topology(t);
    const auto pool = build_gene_pool(t, p, 10, sel, lm);
    const FitnessEvaluator eval(t, pool, sel, lm);
    const auto a = make_individual({0, 1, 2, 3, 4, 5, 6, 8, 9}, eval, 50.0);
    for (int k = 0; k < 50; ++k) {
      const auto m = mutate(a, 10, rng, eval, 50.0);
      CHECK(std::count(m.individual.genes.begin(), m.individual.genes.end(), 7) == 1);
      CHECK(differing(a.genes, m.individual.genes) == 1);
    }
    const auto full = make_individual({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, eval, 50.0);
    CHECK_FALSE(mutate(full, 10, rng, eval, 50.0).mutated);

    Rng r1(99), r2(99);
    for (int k = 0; k < 20; ++k) CHECK(mutate(a, 10, r1, eval, 50.0).individual == mutate(a, 10, r2, eval, 50.0).individual);
  }

  TEST_CASE("individual invariants") {
    CHECK(is_valid_individual({{0, 2, 5}, 0.0, false}, 3, 10));
    CHECK_FALSE(is_valid_individual({{0, 2, 2}, 0.0, false}, 3, 10));
    CHECK_FALSE(is_valid_individual({{2, 0, 5}, 0.0, false}, 3, 10));
    CHECK_FALSE(is_valid_individual({{0, 2, 10}, 0.0, false}, 3, 10));
    CHECK_FALSE(is_valid_individual({{0, 2}, 0.0, false}, 3, 10));
  }

  TEST_CASE("evolve finds the exhaustive optimum and elitism never loses the best") {
    const auto t = wide_topology();
    Rng rng(46);
    int hits = 0, runs = 0;
    for (int inst = 0; inst < 3; ++inst) {
      const auto p = oracle::random_params(t, rng, 1.0);
      const auto sel = random_selections(t, rng);
      const auto lm = LatencyModel::from_topology(t);
      const auto pool = build_gene_pool(t, p, 10, sel, lm);
      const FitnessEvaluator eval(t, pool, sel, lm);
      for (std::size_t n_l : {3, 5, 7, 8}) {
        const auto best = oracle::best_subset(t, pool, n_l, sel, lm);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
          const auto r = evolve(pool, n_l, GaConfig{}, eval, 1e9, seed);
          CHECK(is_valid_individual(r.best, n_l, 10));
          ++runs;
          hits += std::abs(r.best.fitness_latency_ms - best.latency) < 1e-9;
          CHECK(r.best_latency_per_generation.size() == GaConfig{}.generations + 1);
          for (std::size_t g = 1; g < r.best_latency_per_generation.size(); ++g) {
            CHECK(r.best_latency_per_generation[g] <= r.best_latency_per_generation[g - 1]);
          }
        }
      }
    }
    CHECK(hits >= runs - 1);
  }

  TEST_CASE("n_l equal to the pool size returns the whole pool") {
    const auto t = wide_topology();
    Rng rng(47);
    const auto p = oracle::random_params(t, rng, 1.0);
    const auto sel = random_selections(t, rng);
    const auto lm = LatencyModel::from_topology(t);
    const auto pool = build_gene_pool(t, p, 6, sel, lm);
    const FitnessEvaluator eval(t, pool, sel, lm);
    GaConfig cfg;
    cfg.pool_capacity = 6;
    const auto r = evolve(pool, 6, cfg, eval, 1e9, 1);
    CHECK(r.best.genes == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
    CHECK(r.best_latency_per_generation.size() == 1);
  }

  TEST_CASE("GA config echoes the published defaults") {
    const GaConfig cfg;
    CHECK(cfg.population == 20);
    CHECK(cfg.generations == 100);
    CHECK(cfg.pool_capacity == 10);
    GaConfig bad;
    bad.population = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = {};
    bad.mutation_rate = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("greedy and GA decodes") {
    const auto t = wide_topology();
    Rng rng(48);
    const auto p = oracle::random_params(t, rng, 1.0);
    const auto m = oracle::random_surrogate(t, rng);
    const auto lm = LatencyModel::from_topology(t);
    const DecodeContext ctx{t, m, lm, 50.0};
    const auto g1 = decode_greedy(ctx, p, 1);
    REQUIRE(g1.paths.size() == 1);
    CHECK(g1.paths[0].cells == oracle::ranked_paths(t, p).front().second);
    CHECK(g1.method == "greedy");
    CHECK(g1.throughput_fps == doctest::Approx(1000.0 / g1.latency_ms));
    CHECK(g1.score > 0.0);
    CHECK(g1.score <= kDefaultPathGain);
    double prev_g = 0.0, prev_a = 0.0;
    for (std::size_t n : {1, 3, 5, 7}) {
      const auto g = decode_greedy(ctx, p, n);
      const auto a = decode_ga(ctx, p, n, GaConfig{}, 5);
      CHECK(a.paths.size() == n);
      CHECK(a.latency_ms <= g.latency_ms + 1e-9);
      CHECK(g.latency_ms >= prev_g - 1e-9);
      CHECK(a.latency_ms >= prev_a - 1e-9);
      prev_g = g.latency_ms;
      prev_a = a.latency_ms;
      const auto used = a.used_cells();
      CHECK(std::is_sorted(used.begin(), used.end()));
    }
  }

  TEST_CASE("network score grows with paths and stays below one") {
    const auto t = wide_topology();
    Rng rng(49);
    const auto m = oracle::random_surrogate(t, rng);
    const auto best = argmax_selections(t, MixtureWeights{m.target});
    const auto paths = enumerate_paths(t);
    double prev = 0.0;
    std::vector<CellPath> chosen;
    for (std::size_t k = 0; k < 5; ++k) {
      chosen.push_back(paths[k]);
      const double s = network_score(t, m, chosen, best, 0.5);
      CHECK(s > prev);
      CHECK(s < 1.0);
      prev = s;
    }
    CHECK(network_score(t, m, std::vector<CellPath>{paths[0]}, best, 0.5) == doctest::Approx(0.5));
  }
}
