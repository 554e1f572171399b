#include "rtdnas/gradient.hpp"

#include <algorithm>
#include <cmath>

namespace rtdnas {

void LossConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("loss.lambda must be >= 0");
  if (!(latency_ub_ms > 0.0) || !std::isfinite(latency_ub_ms)) {
    throw ConfigError("latency_ub_ms must be > 0");
  }
  if (!(penalty_temp_ms > 0.0) || !std::isfinite(penalty_temp_ms)) {
    throw ConfigError("loss.penalty_temp_ms must be > 0");
  }
}

LossTerms loss_terms(double accuracy_loss, double latency_ms, const LossConfig& cfg) {
  LossTerms t;
  t.accuracy = accuracy_loss;
  t.latency_ms = latency_ms;
  double exponent = (latency_ms - cfg.latency_ub_ms) / cfg.penalty_temp_ms;
  if (exponent > kMaxPenaltyExponent) {
    exponent = kMaxPenaltyExponent;
    t.clamped = true;
  }
  t.penalty = cfg.lambda == 0.0 ? 0.0 : cfg.lambda * std::exp(exponent);
  t.total = accuracy_loss * latency_ms + t.penalty;
  return t;
}

namespace {

struct LatencyPass {
  double latency = 0.0;
  std::vector<double> gradient;
};

LatencyPass latency_with_gradient(const ArchParams& params, const SupernetTopology& topology,
                                  const MixtureWeights& w, const LatencyModel& latency_model) {
  const std::size_t n_cells = topology.n_cells();
  const std::size_t n_ops = topology.n_ops();
  const auto& edges = topology.edges();

  std::vector<double> cell_lat(n_cells);
  std::vector<LongestPath> critical(n_cells);
  std::vector<EdgeLengths> lengths;
  lengths.reserve(n_cells);
  for (std::size_t c = 0; c < n_cells; ++c) {
    lengths.push_back(expected_edge_lengths(topology, c, w, latency_model));
    critical[c] = longest_path(lengths[c]);
    cell_lat[c] = critical[c].length + latency_model.cell_scaling[c];
  }

  const auto prob = transition_probabilities(topology, params);
  std::vector<double> k(topology.n_nodes(), 0.0);
  k[topology.input_node()] = 1.0;
  for (std::size_t e = 0; e < edges.size(); ++e) k[edges[e].to] += k[edges[e].from] * prob[e];

  // Expected latency-to-go from each node.
  std::vector<double> to_go(topology.n_nodes(), 0.0);
  for (NodeId v = topology.n_nodes(); v-- > 0;) {
    double acc = topology.is_cell(v) ? cell_lat[SupernetTopology::node_cell(v)] : 0.0;
    for (std::size_t e : topology.out_edges(v)) acc += prob[e] * to_go[edges[e].to];
    to_go[v] = acc;
  }

  LatencyPass out;
  out.gradient.assign(topology.param_count(), 0.0);
  for (int l = 1; l <= topology.n_layers(); ++l) {
    for (std::size_t c : topology.layer_cells(l)) out.latency += k[SupernetTopology::cell_node(c)] * cell_lat[c];
  }

  // Transition coefficients: dL_t/dp_e = k[from] * to_go[to], pushed through
  // each node's outgoing softmax.
  for (NodeId u = 0; u < topology.n_nodes(); ++u) {
    const auto out_edges = topology.out_edges(u);
    if (out_edges.empty()) continue;
    double mean = 0.0;
    for (std::size_t e : out_edges) mean += prob[e] * k[u] * to_go[edges[e].to];
    for (std::size_t e : out_edges) {
      out.gradient[topology.transition_index(e)] = prob[e] * (k[u] * to_go[edges[e].to] - mean);
    }
  }

  // Cell coefficients: only groups on the critical path contribute, each
  // through the one edge the path enters it by.
  for (std::size_t c = 0; c < n_cells; ++c) {
    const double kc = k[SupernetTopology::cell_node(c)];
    const auto& path = critical[c].tensors;
    for (std::size_t step = 1; step < path.size(); ++step) {
      const int i = path[step];
      const int j_on_path = path[step - 1];
      const double edge = lengths[c].at(i, j_on_path);
      const std::size_t off = topology.group_offset(c, i);
      const auto wg = w.group(topology, c, i);
      for (int j = 0; j < i; ++j) {
        for (std::size_t o = 0; o < n_ops; ++o) {
          const std::size_t m = static_cast<std::size_t>(j) * n_ops + o;
          const double direct = (j == j_on_path) ? latency_model.op_cost(topology, c, o) : 0.0;
          out.gradient[off + m] += kc * wg[m] * (direct - edge);
        }
      }
    }
  }
  return out;
}

}  // namespace

LossTerms evaluate_loss(const ArchParams& params, const SupernetTopology& topology,
                        const SurrogateModel& model, const LatencyModel& latency_model,
                        const LossConfig& cfg) {
  const MixtureWeights w = mixture_weights(params, topology);
  const double la = surrogate_loss(w, model);
  const double lt = expected_network_latency(topology, params, latency_model);
  return loss_terms(la, lt, cfg);
}

LossEvaluation evaluate_loss_and_gradient(const ArchParams& params, const SupernetTopology& topology,
                                          const SurrogateModel& model,
                                          const LatencyModel& latency_model, const LossConfig& cfg) {
  const MixtureWeights w = mixture_weights(params, topology);
  const double la = surrogate_loss(w, model);
  LatencyPass lat = latency_with_gradient(params, topology, w, latency_model);
  const auto grad_la = surrogate_loss_gradient(params, topology, model);

  LossEvaluation out;
  out.terms = loss_terms(la, lat.latency, cfg);
  // dL = L_t dL_a + (L_a + penalty / tau) dL_t
  const double latency_scale = la + out.terms.penalty / cfg.penalty_temp_ms;
  out.gradient = std::move(lat.gradient);
  for (std::size_t m = 0; m < out.gradient.size(); ++m) out.gradient[m] *= latency_scale;
  for (std::size_t m = 0; m < grad_la.size(); ++m) out.gradient[m] += lat.latency * grad_la[m];
  return out;
}

std::vector<double> grad_arch_params(const ArchParams& params, const SupernetTopology& topology,
                                     const SurrogateModel& model, const LatencyModel& latency_model,
                                     const LossConfig& cfg) {
  return evaluate_loss_and_gradient(params, topology, model, latency_model, cfg).gradient;
}

std::vector<double> expected_latency_gradient(const ArchParams& params,
                                              const SupernetTopology& topology,
                                              const LatencyModel& latency_model) {
  const MixtureWeights w = mixture_weights(params, topology);
  return latency_with_gradient(params, topology, w, latency_model).gradient;
}

}  // namespace rtdnas
