#include "rtdnas/latency.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace rtdnas {

LatencyModel LatencyModel::from_topology(const SupernetTopology& topology, double pipeline_overlap) {
  LatencyModel m;
  for (const auto& op : topology.ops()) m.op_latency.push_back(op.latency_per_scale);
  for (const auto& c : topology.cells()) m.cell_scaling.push_back(c.scaling_latency);
  m.pipeline_overlap = pipeline_overlap;
  m.validate(topology);
  return m;
}

void LatencyModel::validate(const SupernetTopology& topology) const {
  auto bad = [](double x) { return !std::isfinite(x) || x < 0.0; };
  if (op_latency.size() != topology.n_ops()) throw ConfigError("latency table does not cover every operation");
  for (std::size_t o = 0; o < op_latency.size(); ++o) {
    if (static_cast<int>(op_latency[o].size()) != topology.n_scales()) {
      throw ConfigError("latency table of '" + topology.ops()[o].id + "' does not cover every scale");
    }
    for (double x : op_latency[o]) {
      if (bad(x)) throw ConfigError("latency of '" + topology.ops()[o].id + "' is negative or non-finite");
    }
  }
  if (cell_scaling.size() != topology.n_cells()) throw ConfigError("scaling latency missing for some cells");
  for (double x : cell_scaling) {
    if (bad(x)) throw ConfigError("scaling latency is negative or non-finite");
  }
  if (!std::isfinite(pipeline_overlap) || pipeline_overlap < 1.0) {
    throw ConfigError("pipeline_overlap must be >= 1");
  }
}

LongestPath longest_path(const EdgeLengths& lengths) {
  const int n = lengths.n_tensors();
  std::vector<double> dist(n + 1, 0.0);
  std::vector<int> pred(n + 1, -1);
  for (int i = 1; i <= n; ++i) {
    double best = dist[0] + lengths.at(i, 0);
    int arg = 0;
    for (int j = 1; j < i; ++j) {
      const double d = dist[j] + lengths.at(i, j);
      if (d > best) {
        best = d;
        arg = j;
      }
    }
    dist[i] = best;
    pred[i] = arg;
  }
  LongestPath out;
  out.length = dist[n];
  for (int v = n; v >= 0; v = pred[v]) {
    out.tensors.push_back(v);
    if (v == 0) break;
  }
  std::reverse(out.tensors.begin(), out.tensors.end());
  return out;
}

EdgeLengths expected_edge_lengths(const SupernetTopology& topology, std::size_t c,
                                  const MixtureWeights& weights, const LatencyModel& model) {
  const std::size_t n_ops = topology.n_ops();
  EdgeLengths e(topology.n_tensors());
  for (int i = 1; i <= topology.n_tensors(); ++i) {
    const auto w = weights.group(topology, c, i);
    for (int j = 0; j < i; ++j) {
      double sum = 0.0;
      for (std::size_t o = 0; o < n_ops; ++o) {
        sum += w[static_cast<std::size_t>(j) * n_ops + o] * model.op_cost(topology, c, o);
      }
      e.at(i, j) = sum;
    }
  }
  return e;
}

double expected_cell_latency(const SupernetTopology& topology, std::size_t c,
                             const MixtureWeights& weights, const LatencyModel& model) {
  return longest_path(expected_edge_lengths(topology, c, weights, model)).length +
         model.cell_scaling[c];
}

double discrete_cell_latency(const SupernetTopology& topology, std::size_t c,
                             const CellSelection& selection, const LatencyModel& model) {
  const int n = topology.n_tensors();
  if (static_cast<int>(selection.size()) != n) {
    throw MalformedDecode("cell " + topology.cell(c).id() + " selection must name one edge per tensor");
  }
  EdgeLengths e(n);
  for (int i = 1; i <= n; ++i) {
    const EdgeChoice& ch = selection[i - 1];
    if (ch.source < 0 || ch.source >= i) {
      throw MalformedDecode("cell " + topology.cell(c).id() + ": tensor " + std::to_string(i) +
                            " selects source " + std::to_string(ch.source));
    }
    if (ch.op >= topology.n_ops()) {
      throw MalformedDecode("cell " + topology.cell(c).id() + ": unknown op index");
    }
    e.at(i, ch.source) = model.op_cost(topology, c, ch.op);
  }
  return longest_path(e).length + model.cell_scaling[c];
}

std::vector<double> transition_probabilities(const SupernetTopology& topology,
                                             const ArchParams& params) {
  std::vector<double> prob(topology.edges().size(), 0.0);
  std::vector<double> logits;
  std::vector<double> out;
  for (NodeId node = 0; node < topology.n_nodes(); ++node) {
    const auto edges = topology.out_edges(node);
    if (edges.empty()) continue;
    logits.resize(edges.size());
    out.resize(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) logits[k] = params[topology.transition_index(edges[k])];
    softmax(logits, out);
    for (std::size_t k = 0; k < edges.size(); ++k) prob[edges[k]] = out[k];
  }
  return prob;
}

double LayerMarginals::layer_sum(const SupernetTopology& topology, int layer) const {
  double sum = 0.0;
  for (std::size_t c : topology.layer_cells(layer)) sum += cell(c);
  return sum;
}

LayerMarginals layer_marginals(const SupernetTopology& topology, const ArchParams& params) {
  const auto prob = transition_probabilities(topology, params);
  LayerMarginals k;
  k.node_prob.assign(topology.n_nodes(), 0.0);
  k.node_prob[topology.input_node()] = 1.0;
  // Edges are sorted by source and nodes by layer: sources are final when visited.
  for (std::size_t e = 0; e < topology.edges().size(); ++e) {
    const auto& t = topology.edges()[e];
    k.node_prob[t.to] += k.node_prob[t.from] * prob[e];
  }
  return k;
}

double expected_network_latency(const SupernetTopology& topology, const ArchParams& params,
                                const LatencyModel& model) {
  const MixtureWeights w = mixture_weights(params, topology);
  const LayerMarginals k = layer_marginals(topology, params);
  double total = 0.0;
  for (int l = 1; l <= topology.n_layers(); ++l) {
    for (std::size_t c : topology.layer_cells(l)) {
      total += k.cell(c) * expected_cell_latency(topology, c, w, model);
    }
  }
  return total;
}

double path_latency(const SupernetTopology& topology, const CellPath& path,
                    std::span<const CellSelection> selections, const LatencyModel& model) {
  double total = 0.0;
  for (std::size_t c : path) total += discrete_cell_latency(topology, c, selections[c], model);
  return total;
}

double discrete_network_latency(const SupernetTopology& topology, std::span<const CellPath> paths,
                                std::span<const CellSelection> selections,
                                const LatencyModel& model) {
  std::vector<bool> used(topology.n_cells(), false);
  for (const auto& p : paths) {
    for (std::size_t c : p) used[c] = true;
  }
  double total = 0.0;
  // Cell indices are sorted by layer, so this sums layer by layer.
  for (std::size_t c = 0; c < used.size(); ++c) {
    if (used[c]) total += discrete_cell_latency(topology, c, selections[c], model);
  }
  return total;
}

double throughput(double latency_ms, const LatencyModel& model) {
  if (!(latency_ms > 0.0)) throw Error("degenerate architecture: latency must be > 0 to compute throughput");
  return 1000.0 * model.pipeline_overlap / latency_ms;
}

}  // namespace rtdnas
