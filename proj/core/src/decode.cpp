#include "rtdnas/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace rtdnas {

namespace {

bool path_before(const Path& a, const Path& b) {
  if (a.weight != b.weight) return a.weight > b.weight;
  return a.cells < b.cells;
}

}  // namespace

double path_weight(const SupernetTopology& topology, const CellPath& path,
                   std::span<const double> transition_probs) {
  double w = 0.0;
  NodeId prev = topology.input_node();
  auto step = [&](NodeId next) {
    const std::size_t e = find_edge(topology, prev, next);
    if (e == kNoEdge) throw Error("path uses a transition that is not in the topology");
    w += std::log(transition_probs[e]);
    prev = next;
  };
  for (std::size_t c : path) step(SupernetTopology::cell_node(c));
  step(topology.output_node());
  return w;
}

double path_weight(const SupernetTopology& topology, const CellPath& path, const ArchParams& params) {
  return path_weight(topology, path, transition_probabilities(topology, params));
}

std::vector<Path> decode_topk_paths(const SupernetTopology& topology, const ArchParams& params,
                                    std::size_t k) {
  if (k == 0) throw ConfigError("top-k decode needs k >= 1");
  const std::uint64_t total = topology.path_count();
  if (k > total) {
    throw PathLimitExceeded("requested " + std::to_string(k) + " paths but the supernet has only " +
                            std::to_string(total));
  }
  const auto& edges = topology.edges();
  const auto prob = transition_probabilities(topology, params);
  std::vector<double> log_p(prob.size());
  for (std::size_t e = 0; e < prob.size(); ++e) log_p[e] = std::log(prob[e]);

  // Best achievable suffix weight from every node.
  std::vector<double> best_to_go(topology.n_nodes(), -std::numeric_limits<double>::infinity());
  best_to_go[topology.output_node()] = 0.0;
  for (NodeId v = topology.n_nodes(); v-- > 0;) {
    for (std::size_t e : topology.out_edges(v)) {
      best_to_go[v] = std::max(best_to_go[v], log_p[e] + best_to_go[edges[e].to]);
    }
  }

  struct Entry {
    double priority;
    double prefix;
    NodeId node;
    CellPath cells;
  };
  // Highest priority first; equal priority pops the lexicographically smaller prefix.
  auto worse = [](const Entry& a, const Entry& b) {
    if (a.priority != b.priority) return a.priority < b.priority;
    return a.cells > b.cells;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> open(worse);
  open.push({best_to_go[topology.input_node()], 0.0, topology.input_node(), {}});

  std::vector<Path> out;
  out.reserve(k);
  while (!open.empty() && out.size() < k) {
    Entry cur = open.top();
    open.pop();
    if (cur.node == topology.output_node()) {
      out.push_back(Path{std::move(cur.cells), cur.prefix, 0.0});
      continue;
    }
    for (std::size_t e : topology.out_edges(cur.node)) {
      const NodeId to = edges[e].to;
      Entry next{0.0, cur.prefix + log_p[e], to, cur.cells};
      next.priority = next.prefix + best_to_go[to];
      if (topology.is_cell(to)) next.cells.push_back(SupernetTopology::node_cell(to));
      open.push(std::move(next));
    }
  }
  std::stable_sort(out.begin(), out.end(), path_before);
  return out;
}

GenePool build_gene_pool(const SupernetTopology& topology, const ArchParams& params,
                         std::size_t capacity, std::span<const CellSelection> selections,
                         const LatencyModel& latency_model) {
  GenePool pool;
  pool.capacity = capacity;
  pool.genes = decode_topk_paths(topology, params, capacity);
  for (auto& g : pool.genes) g.latency_ms = path_latency(topology, g.cells, selections, latency_model);
  return pool;
}

FitnessEvaluator::FitnessEvaluator(const SupernetTopology& topology, const GenePool& pool,
                                   std::span<const CellSelection> selections,
                                   const LatencyModel& latency_model)
    : cell_latency_(topology.n_cells(), 0.0), scratch_(topology.n_cells(), 0) {
  std::vector<char> needed(topology.n_cells(), 0);
  for (const auto& g : pool.genes) {
    gene_cells_.push_back(g.cells);
    for (std::size_t c : g.cells) needed[c] = 1;
  }
  for (std::size_t c = 0; c < needed.size(); ++c) {
    if (needed[c]) cell_latency_[c] = discrete_cell_latency(topology, c, selections[c], latency_model);
  }
}

double FitnessEvaluator::latency(std::span<const std::size_t> genes) const {
  double total = 0.0;
  for (std::size_t g : genes) {
    for (std::size_t c : gene_cells_[g]) {
      if (!scratch_[c]) {
        scratch_[c] = 1;
        total += cell_latency_[c];
      }
    }
  }
  for (std::size_t g : genes) {
    for (std::size_t c : gene_cells_[g]) scratch_[c] = 0;
  }
  return total;
}

bool is_valid_individual(const Individual& ind, std::size_t n_l, std::size_t pool_size) {
  if (ind.genes.size() != n_l) return false;
  for (std::size_t k = 0; k < ind.genes.size(); ++k) {
    if (ind.genes[k] >= pool_size) return false;
    if (k > 0 && ind.genes[k] <= ind.genes[k - 1]) return false;
  }
  return true;
}

Individual make_individual(std::vector<std::size_t> genes, const FitnessEvaluator& eval,
                           double budget_ms) {
  Individual ind;
  ind.genes = std::move(genes);
  ind.fitness_latency_ms = eval.latency(ind.genes);
  ind.feasible = ind.fitness_latency_ms <= budget_ms;
  return ind;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> crossover_genes(
    std::span<const std::size_t> a, std::span<const std::size_t> b, std::size_t cut) {
  const std::size_t n = a.size();
  auto child = [n, cut](std::span<const std::size_t> head, std::span<const std::size_t> tail) {
    std::vector<std::size_t> genes(head.begin(), head.begin() + cut);
    genes.insert(genes.end(), tail.begin() + cut, tail.end());
    std::sort(genes.begin(), genes.end());
    genes.erase(std::unique(genes.begin(), genes.end()), genes.end());
    // Displaced genes: the head parent's suffix and the tail parent's prefix.
    std::vector<std::size_t> displaced(head.begin() + cut, head.end());
    displaced.insert(displaced.end(), tail.begin(), tail.begin() + cut);
    std::sort(displaced.begin(), displaced.end());
    for (std::size_t g : displaced) {
      if (genes.size() == n) break;
      if (!std::binary_search(genes.begin(), genes.end(), g)) {
        genes.insert(std::lower_bound(genes.begin(), genes.end(), g), g);
      }
    }
    return genes;
  };
  return {child(a, b), child(b, a)};
}

std::pair<Individual, Individual> crossover(const Individual& a, const Individual& b, Rng& rng,
                                            const FitnessEvaluator& eval, double budget_ms) {
  const std::size_t n = a.genes.size();
  if (n < 2) return {a, b};
  const std::size_t cut = 1 + rng.index(n - 1);
  auto [ga, gb] = crossover_genes(a.genes, b.genes, cut);
  return {make_individual(std::move(ga), eval, budget_ms), make_individual(std::move(gb), eval, budget_ms)};
}

MutationResult mutate(const Individual& a, std::size_t pool_size, Rng& rng,
                      const FitnessEvaluator& eval, double budget_ms) {
  const std::size_t n = a.genes.size();
  if (pool_size <= n) return {a, false};
  std::vector<std::size_t> absent;
  absent.reserve(pool_size - n);
  for (std::size_t g = 0; g < pool_size; ++g) {
    if (!std::binary_search(a.genes.begin(), a.genes.end(), g)) absent.push_back(g);
  }
  std::vector<std::size_t> genes = a.genes;
  const std::size_t pos = rng.index(n);
  genes[pos] = absent[rng.index(absent.size())];
  std::sort(genes.begin(), genes.end());
  return {make_individual(std::move(genes), eval, budget_ms), true};
}

void GaConfig::validate() const {
  if (population < 2) throw ConfigError("ga.population must be >= 2");
  if (pool_capacity < 1) throw ConfigError("ga.pool must be >= 1");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) throw ConfigError("ga.crossover_rate must be in [0,1]");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ConfigError("ga.mutation_rate must be in [0,1]");
  if (elitism > population) throw ConfigError("ga.elitism cannot exceed the population");
}

namespace {

bool fitter(const Individual& a, const Individual& b) {
  if (a.fitness_latency_ms != b.fitness_latency_ms) return a.fitness_latency_ms < b.fitness_latency_ms;
  return a.genes < b.genes;
}

std::vector<std::size_t> random_subset(std::size_t pool_size, std::size_t n, Rng& rng) {
  std::vector<std::size_t> all(pool_size);
  for (std::size_t g = 0; g < pool_size; ++g) all[g] = g;
  for (std::size_t k = 0; k < n; ++k) std::swap(all[k], all[k + rng.index(pool_size - k)]);
  all.resize(n);
  std::sort(all.begin(), all.end());
  return all;
}

// Roulette wheel over inverse latency.
std::size_t select_parent(const std::vector<double>& cumulative, Rng& rng) {
  const double r = rng.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

}  // namespace

EvolveResult evolve(const GenePool& pool, std::size_t n_l, const GaConfig& cfg,
                    const FitnessEvaluator& eval, double budget_ms, std::uint64_t seed) {
  cfg.validate();
  const std::size_t P = pool.size();
  if (n_l == 0 || n_l > P) {
    throw ConfigError("cannot form individuals of " + std::to_string(n_l) + " paths from a pool of " +
                      std::to_string(P));
  }
  EvolveResult result;
  if (n_l == P) {
    std::vector<std::size_t> all(P);
    for (std::size_t g = 0; g < P; ++g) all[g] = g;
    result.best = make_individual(std::move(all), eval, budget_ms);
    result.best_latency_per_generation.push_back(result.best.fitness_latency_ms);
    return result;
  }

  Rng rng(seed);
  std::vector<Individual> population;
  population.reserve(cfg.population);
  for (std::size_t p = 0; p < cfg.population; ++p) {
    population.push_back(make_individual(random_subset(P, n_l, rng), eval, budget_ms));
  }
  std::sort(population.begin(), population.end(), fitter);
  result.best = population.front();
  result.best_latency_per_generation.push_back(result.best.fitness_latency_ms);

  std::vector<double> cumulative(cfg.population);
  for (std::size_t gen = 0; gen < cfg.generations; ++gen) {
    double acc = 0.0;
    for (std::size_t p = 0; p < population.size(); ++p) {
      acc += 1.0 / std::max(population[p].fitness_latency_ms, 1e-12);
      cumulative[p] = acc;
    }
    std::vector<Individual> next(population.begin(), population.begin() + cfg.elitism);
    while (next.size() < cfg.population) {
      const Individual& pa = population[select_parent(cumulative, rng)];
      const Individual& pb = population[select_parent(cumulative, rng)];
      std::pair<Individual, Individual> children{pa, pb};
      if (rng.bernoulli(cfg.crossover_rate)) children = crossover(pa, pb, rng, eval, budget_ms);
      for (Individual* child : {&children.first, &children.second}) {
        // a copy of an individual already in the next generation is always mutated
        const bool copy = std::any_of(next.begin(), next.end(),
                                      [&](const Individual& ind) { return ind.genes == child->genes; });
        if (copy || rng.bernoulli(cfg.mutation_rate)) *child = mutate(*child, P, rng, eval, budget_ms).individual;
        if (next.size() < cfg.population) next.push_back(std::move(*child));
      }
    }
    population = std::move(next);
    std::sort(population.begin(), population.end(), fitter);
    if (fitter(population.front(), result.best)) result.best = population.front();
    result.best_latency_per_generation.push_back(result.best.fitness_latency_ms);
  }
  return result;
}

double network_score(const SupernetTopology& topology, const SurrogateModel& model,
                     std::span<const CellPath> paths, std::span<const CellSelection> selections,
                     double path_gain) {
  std::vector<double> alignment(topology.n_cells(), -1.0);
  double miss = 1.0;
  for (const auto& p : paths) {
    double q = 0.0;
    for (std::size_t c : p) {
      if (alignment[c] < 0.0) alignment[c] = cell_alignment(topology, model, c, selections[c]);
      q += alignment[c];
    }
    q /= static_cast<double>(p.size());
    miss *= 1.0 - path_gain * q;
  }
  return 1.0 - miss;
}

std::vector<std::size_t> DecodedNetwork::used_cells() const {
  std::vector<std::size_t> cells;
  for (const auto& p : paths) cells.insert(cells.end(), p.cells.begin(), p.cells.end());
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return cells;
}

DecodedNetwork evaluate_network(const DecodeContext& ctx, std::string method, std::vector<Path> paths,
                                std::vector<CellSelection> selections) {
  DecodedNetwork net;
  net.method = std::move(method);
  net.paths = std::move(paths);
  net.selections = std::move(selections);
  std::vector<CellPath> cell_paths;
  for (const auto& p : net.paths) cell_paths.push_back(p.cells);
  net.latency_ms = discrete_network_latency(ctx.topology, cell_paths, net.selections, ctx.latency_model);
  net.throughput_fps = throughput(net.latency_ms, ctx.latency_model);
  net.score = network_score(ctx.topology, ctx.surrogate, cell_paths, net.selections, ctx.path_gain);
  net.feasible = net.latency_ms <= ctx.budget_ms;
  return net;
}

DecodedNetwork decode_greedy(const DecodeContext& ctx, const ArchParams& params, std::size_t n_l) {
  auto selections = argmax_selections(ctx.topology, mixture_weights(params, ctx.topology));
  auto paths = decode_topk_paths(ctx.topology, params, n_l);
  for (auto& p : paths) p.latency_ms = path_latency(ctx.topology, p.cells, selections, ctx.latency_model);
  return evaluate_network(ctx, "greedy", std::move(paths), std::move(selections));
}

DecodedNetwork decode_ga(const DecodeContext& ctx, const ArchParams& params, std::size_t n_l,
                         const GaConfig& cfg, std::uint64_t seed) {
  auto selections = argmax_selections(ctx.topology, mixture_weights(params, ctx.topology));
  const GenePool pool = build_gene_pool(ctx.topology, params, cfg.pool_capacity, selections, ctx.latency_model);
  const FitnessEvaluator eval(ctx.topology, pool, selections, ctx.latency_model);
  const EvolveResult res = evolve(pool, n_l, cfg, eval, ctx.budget_ms, seed);
  std::vector<Path> paths;
  for (std::size_t g : res.best.genes) paths.push_back(pool.genes[g]);
  return evaluate_network(ctx, "ga", std::move(paths), std::move(selections));
}

}  // namespace rtdnas
