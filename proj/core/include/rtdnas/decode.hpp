#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rtdnas/latency.hpp"
#include "rtdnas/random.hpp"
#include "rtdnas/relaxation.hpp"
#include "rtdnas/supernet.hpp"

namespace rtdnas {

struct Path {
  CellPath cells;           // one cell index per layer
  double weight = 0.0;      // log-probability under the transition model
  double latency_ms = 0.0;  // single-path discrete latency, 0 until evaluated
};

// Log-probability of `path` given per-edge transition probabilities.
double path_weight(const SupernetTopology& topology, const CellPath& path,
                   std::span<const double> transition_probs);

double path_weight(const SupernetTopology& topology, const CellPath& path, const ArchParams& params);

// k highest-weight paths, best-first over the layered DAG with an exact
// suffix heuristic. Sorted by (weight desc, cell ids asc). Throws
// PathLimitExceeded when k exceeds the number of paths.
std::vector<Path> decode_topk_paths(const SupernetTopology& topology, const ArchParams& params,
                                    std::size_t k);

struct GenePool {
  std::vector<Path> genes;  // weight desc, ties by cell ids asc
  std::size_t capacity = 0;

  std::size_t size() const { return genes.size(); }
};

GenePool build_gene_pool(const SupernetTopology& topology, const ArchParams& params,
                         std::size_t capacity, std::span<const CellSelection> selections,
                         const LatencyModel& latency_model);

// Latency of a set of pool genes with overlapping cells counted once.
class FitnessEvaluator {
 public:
  FitnessEvaluator(const SupernetTopology& topology, const GenePool& pool,
                   std::span<const CellSelection> selections, const LatencyModel& latency_model);

  std::size_t pool_size() const { return gene_cells_.size(); }
  double latency(std::span<const std::size_t> genes) const;

 private:
  std::vector<double> cell_latency_;
  std::vector<std::vector<std::size_t>> gene_cells_;
  mutable std::vector<char> scratch_;
};

struct Individual {
  std::vector<std::size_t> genes;  // strictly increasing pool indices
  double fitness_latency_ms = 0.0;
  bool feasible = false;

  friend bool operator==(const Individual&, const Individual&) = default;
};

// Checks the Individual invariants against a pool of `pool_size` genes.
bool is_valid_individual(const Individual& ind, std::size_t n_l, std::size_t pool_size);

Individual make_individual(std::vector<std::size_t> genes, const FitnessEvaluator& eval,
                           double budget_ms);

// Single-point exchange after `cut` leading genes, then repair: duplicates
// are refilled from the displaced parent genes in pool (weight) order.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> crossover_genes(
    std::span<const std::size_t> a, std::span<const std::size_t> b, std::size_t cut);

std::pair<Individual, Individual> crossover(const Individual& a, const Individual& b, Rng& rng,
                                            const FitnessEvaluator& eval, double budget_ms);

struct MutationResult {
  Individual individual;
  bool mutated = false;  // false when every pool gene is already present
};

MutationResult mutate(const Individual& a, std::size_t pool_size, Rng& rng,
                      const FitnessEvaluator& eval, double budget_ms);

struct GaConfig {
  std::size_t population = 20;
  std::size_t generations = 100;
  std::size_t pool_capacity = 10;
  double crossover_rate = 0.8;
  double mutation_rate = 0.2;
  std::size_t elitism = 1;

  void validate() const;
};

struct EvolveResult {
  Individual best;
  std::vector<double> best_latency_per_generation;  // index 0 is the initial population
};

// Latency-only GA over subsets of the pool. Returns the lowest-latency
// individual seen (feasible when it meets the budget).
EvolveResult evolve(const GenePool& pool, std::size_t n_l, const GaConfig& cfg,
                    const FitnessEvaluator& eval, double budget_ms, std::uint64_t seed);

// Surrogate accuracy of a decoded network: 1 - prod_p (1 - gain * q_p),
// q_p the mean cell_alignment along path p.
double network_score(const SupernetTopology& topology, const SurrogateModel& model,
                     std::span<const CellPath> paths, std::span<const CellSelection> selections,
                     double path_gain);

inline constexpr double kDefaultPathGain = 0.5;

struct DecodedNetwork {
  std::string method;  // "greedy", "ga", "random"
  std::vector<Path> paths;
  std::vector<CellSelection> selections;  // every cell; only cells on paths matter
  double latency_ms = 0.0;
  double throughput_fps = 0.0;
  double score = 0.0;
  bool feasible = false;

  std::vector<std::size_t> used_cells() const;
};

struct DecodeContext {
  const SupernetTopology& topology;
  const SurrogateModel& surrogate;
  const LatencyModel& latency_model;
  double budget_ms = 50.0;
  double path_gain = kDefaultPathGain;
};

// Top-n_l paths by weight (the weight-greedy baseline).
DecodedNetwork decode_greedy(const DecodeContext& ctx, const ArchParams& params, std::size_t n_l);

// GA over a pool of the top cfg.pool_capacity paths.
DecodedNetwork decode_ga(const DecodeContext& ctx, const ArchParams& params, std::size_t n_l,
                         const GaConfig& cfg, std::uint64_t seed);

// Fills latency, throughput, score and feasibility for given paths/selections.
DecodedNetwork evaluate_network(const DecodeContext& ctx, std::string method, std::vector<Path> paths,
                                std::vector<CellSelection> selections);

}  // namespace rtdnas
