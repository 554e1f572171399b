#pragma once

#include <span>
#include <vector>

#include "rtdnas/relaxation.hpp"
#include "rtdnas/supernet.hpp"

namespace rtdnas {

// Analytic cost tables. All latencies are in milliseconds.
struct LatencyModel {
  std::vector<std::vector<double>> op_latency;  // [op][scale]
  std::vector<double> cell_scaling;             // S_cell per cell index
  double pipeline_overlap = 1.0;                // throughput divisor, >= 1

  static LatencyModel from_topology(const SupernetTopology& topology, double pipeline_overlap = 1.0);

  // Throws ConfigError on shape mismatch, negative or non-finite entries.
  void validate(const SupernetTopology& topology) const;

  // Latency of op `o` inside cell `c` (tensors live at the cell's input scale).
  double op_cost(const SupernetTopology& topology, std::size_t c, std::size_t o) const {
    return op_latency[o][topology.cell(c).input_scale()];
  }
};

// Edge lengths of the tensor DAG of one cell: length(i, j) for 0 <= j < i <= N.
class EdgeLengths {
 public:
  explicit EdgeLengths(int n_tensors)
      : n_(n_tensors), len_(static_cast<std::size_t>(n_tensors) * (n_tensors + 1) / 2, 0.0) {}
  int n_tensors() const { return n_; }
  double& at(int i, int j) { return len_[index(i, j)]; }
  double at(int i, int j) const { return len_[index(i, j)]; }

 private:
  static std::size_t index(int i, int j) { return static_cast<std::size_t>(i) * (i - 1) / 2 + j; }
  int n_;
  std::vector<double> len_;
};

struct LongestPath {
  double length = 0.0;
  std::vector<int> tensors;  // X_0 ... X_N along the critical path
};

// Longest X_0 -> X_N path by DP over index order; ties keep the lowest source.
LongestPath longest_path(const EdgeLengths& lengths);

// Expected edge latency: sum over ops of joint mixture weight * op latency.
EdgeLengths expected_edge_lengths(const SupernetTopology& topology, std::size_t c,
                                  const MixtureWeights& weights, const LatencyModel& model);

// Longest expected path plus S_cell.
double expected_cell_latency(const SupernetTopology& topology, std::size_t c,
                             const MixtureWeights& weights, const LatencyModel& model);

// Decoded cell: each tensor keeps one (source, op). Unselected pairs act as
// zero-length precedence edges, the limit of one-hot mixture weights.
// Throws MalformedDecode for a source >= target or an unknown op.
double discrete_cell_latency(const SupernetTopology& topology, std::size_t c,
                             const CellSelection& selection, const LatencyModel& model);

// Per-edge sampling probability: softmax of transition coefficients over
// each node's outgoing edges.
std::vector<double> transition_probabilities(const SupernetTopology& topology,
                                             const ArchParams& params);

// k_c^l: probability that a sampled input->output path passes each node.
struct LayerMarginals {
  std::vector<double> node_prob;  // indexed by node id; input and output are 1

  double cell(std::size_t c) const { return node_prob[SupernetTopology::cell_node(c)]; }
  double layer_sum(const SupernetTopology& topology, int layer) const;
};

LayerMarginals layer_marginals(const SupernetTopology& topology, const ArchParams& params);

// sum over layers and cells of k_c^l * expected cell latency.
double expected_network_latency(const SupernetTopology& topology, const ArchParams& params,
                                const LatencyModel& model);

// Sum of discrete_cell_latency over a path.
double path_latency(const SupernetTopology& topology, const CellPath& path,
                    std::span<const CellSelection> selections, const LatencyModel& model);

// Union of the cells covered by `paths`, each counted once, executed
// sequentially.
double discrete_network_latency(const SupernetTopology& topology, std::span<const CellPath> paths,
                                std::span<const CellSelection> selections,
                                const LatencyModel& model);

// Frames per second of a pipelined network: 1000 * overlap / latency.
// Throws Error for non-positive latency.
double throughput(double latency_ms, const LatencyModel& model);

}  // namespace rtdnas
