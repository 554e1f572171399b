#include "rtdnas/supernet.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "rtdnas/random.hpp"

namespace rtdnas {

namespace {

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

auto cell_key(const CellTemplate& c) {
  return std::make_tuple(c.layer, c.scale, static_cast<int>(c.type));
}

void check_ops(const std::vector<OperationSpec>& ops, int n_scales) {
  if (ops.empty()) throw InvalidSkeleton("operation set is empty");
  std::set<std::string> ids;
  for (const auto& op : ops) {
    if (op.id.empty()) throw InvalidSkeleton("operation with empty id");
    if (!ids.insert(op.id).second) throw InvalidSkeleton("duplicate operation id '" + op.id + "'");
    if (static_cast<int>(op.latency_per_scale.size()) != n_scales) {
      throw InvalidSkeleton("operation '" + op.id + "' has " +
                            std::to_string(op.latency_per_scale.size()) +
                            " latency entries, expected one per scale (" +
                            std::to_string(n_scales) + ")");
    }
    for (double lat : op.latency_per_scale) {
      if (!finite_nonneg(lat)) {
        throw InvalidSkeleton("operation '" + op.id + "' has a negative or non-finite latency");
      }
    }
    if (!std::isfinite(op.quality)) {
      throw InvalidSkeleton("operation '" + op.id + "' has non-finite quality");
    }
  }
}

}  // namespace

const char* to_string(CellType type) {
  switch (type) {
    case CellType::expanding:
      return "expanding";
    case CellType::non_scaling:
      return "non_scaling";
    case CellType::contracting:
      return "contracting";
  }
  return "?";
}

CellType cell_type_from_string(const std::string& name) {
  if (name == "expanding") return CellType::expanding;
  if (name == "non_scaling") return CellType::non_scaling;
  if (name == "contracting") return CellType::contracting;
  throw ConfigError("unknown cell type '" + name + "'");
}

int scale_delta(CellType type) {
  switch (type) {
    case CellType::expanding:
      return -1;
    case CellType::non_scaling:
      return 0;
    case CellType::contracting:
      return 1;
  }
  return 0;
}

std::string CellTemplate::id() const {
  static constexpr char kTag[] = {'E', 'N', 'C'};
  return "l" + std::to_string(layer) + ".s" + std::to_string(scale) + "." +
         kTag[static_cast<int>(type)];
}

SupernetTopology SupernetTopology::assemble(int n_layers, int n_scales, int n_tensors,
                                            std::vector<OperationSpec> ops,
                                            std::vector<CellTemplate> cells,
                                            std::vector<Transition> edges) {
  if (n_layers < 1) throw InvalidSkeleton("layer count must be >= 1");
  if (n_scales < 1) throw InvalidSkeleton("scale count must be >= 1");
  if (n_tensors < 1) throw InvalidSkeleton("tensors per cell must be >= 1");
  check_ops(ops, n_scales);

  std::set<std::tuple<int, int, int>> seen;
  for (const auto& c : cells) {
    if (c.layer < 1 || c.layer > n_layers) {
      throw InvalidSkeleton("cell " + c.id() + " lies outside layers 1.." + std::to_string(n_layers));
    }
    if (c.scale < 0 || c.scale >= n_scales || c.input_scale() < 0 || c.input_scale() >= n_scales) {
      throw InvalidSkeleton("cell " + c.id() + " leaves the declared scale range");
    }
    if (c.n_tensors != n_tensors) throw InvalidSkeleton("cell " + c.id() + " has a different tensor count");
    if (!finite_nonneg(c.scaling_latency)) {
      throw InvalidSkeleton("cell " + c.id() + " has a negative or non-finite scaling latency");
    }
    if (!seen.insert(cell_key(c)).second) throw InvalidSkeleton("duplicate cell " + c.id());
  }

  // Sort cells and remap edge endpoints onto the sorted node ids.
  const std::size_t n = cells.size();
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return cell_key(cells[a]) < cell_key(cells[b]); });
  std::vector<NodeId> remap(n + 2);
  remap[0] = 0;
  remap[n + 1] = n + 1;
  for (std::size_t pos = 0; pos < n; ++pos) remap[order[pos] + 1] = pos + 1;

  SupernetTopology t;
  t.n_layers_ = n_layers;
  t.n_scales_ = n_scales;
  t.n_tensors_ = n_tensors;
  t.ops_ = std::move(ops);
  t.cells_.reserve(n);
  for (std::size_t k : order) t.cells_.push_back(cells[k]);

  for (auto& e : edges) {
    if (e.from > n + 1 || e.to > n + 1) throw InvalidSkeleton("edge endpoint out of range");
    e.from = remap[e.from];
    e.to = remap[e.to];
  }
  std::sort(edges.begin(), edges.end(), [](const Transition& a, const Transition& b) {
    return std::tie(a.from, a.to) < std::tie(b.from, b.to);
  });
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (k > 0 && edges[k].from == edges[k - 1].from && edges[k].to == edges[k - 1].to) {
      throw InvalidSkeleton("duplicate transition");
    }
  }
  t.edges_ = std::move(edges);

  t.out_.assign(n + 2, {});
  t.in_.assign(n + 2, {});
  for (std::size_t k = 0; k < t.edges_.size(); ++k) {
    const auto& e = t.edges_[k];
    if (t.node_layer(e.to) != t.node_layer(e.from) + 1) {
      throw InvalidSkeleton("transition must join consecutive layers");
    }
    t.out_[e.from].push_back(k);
    t.in_[e.to].push_back(k);
  }

  t.layers_.assign(n_layers, {});
  for (std::size_t c = 0; c < n; ++c) t.layers_[t.cells_[c].layer - 1].push_back(c);
  for (int l = 0; l < n_layers; ++l) {
    if (t.layers_[l].empty()) throw InvalidSkeleton("layer " + std::to_string(l + 1) + " has no cells");
  }
  if (t.out_[0].empty()) throw InvalidSkeleton("input node has no outgoing transition");
  if (t.in_[n + 1].empty()) throw InvalidSkeleton("output node has no incoming transition");
  for (std::size_t c = 0; c < n; ++c) {
    if (t.in_[c + 1].empty() || t.out_[c + 1].empty()) {
      throw InvalidSkeleton("cell " + t.cells_[c].id() + " is not on any input-output path");
    }
  }

  const std::size_t pairs = static_cast<std::size_t>(n_tensors) * (n_tensors + 1) / 2;
  t.block_size_ = pairs * t.ops_.size();
  t.hash_ = t.compute_hash();
  return t;
}

int SupernetTopology::node_layer(NodeId node) const {
  if (node == 0) return 0;
  if (node == output_node()) return n_layers_ + 1;
  return cells_[node - 1].layer;
}

std::size_t SupernetTopology::group_offset(std::size_t c, int i) const {
  const std::size_t before = static_cast<std::size_t>(i - 1) * i / 2;
  return c * block_size_ + before * ops_.size();
}

std::size_t SupernetTopology::coeff_index(std::size_t c, int i, int j, std::size_t op) const {
  return group_offset(c, i) + static_cast<std::size_t>(j) * ops_.size() + op;
}

std::uint64_t SupernetTopology::path_count() const {
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  std::vector<std::uint64_t> count(n_nodes(), 0);
  count[0] = 1;
  // Node ids are sorted by layer, and edges by source node.
  for (const auto& e : edges_) {
    const std::uint64_t add = count[e.from];
    count[e.to] = (kMax - count[e.to] < add) ? kMax : count[e.to] + add;
  }
  return count[output_node()];
}

std::uint64_t SupernetTopology::compute_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  char buf[64];
  auto num = [&buf](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  feed(std::to_string(n_layers_) + "/" + std::to_string(n_scales_) + "/" + std::to_string(n_tensors_));
  for (const auto& op : ops_) {
    feed(op.id);
    for (double lat : op.latency_per_scale) feed(num(lat));
  }
  for (const auto& c : cells_) feed(c.id() + "@" + num(c.scaling_latency));
  for (const auto& e : edges_) feed(std::to_string(e.from) + ">" + std::to_string(e.to));
  return h;
}

SupernetTopology build_topology(const SkeletonConfig& config) {
  if (config.n_layers < 1) throw InvalidSkeleton("layer count must be >= 1");
  if (config.n_scales < 1) throw InvalidSkeleton("scale count must be >= 1");
  if (config.n_tensors < 1) throw InvalidSkeleton("tensors per cell must be >= 1");
  if (config.input_scale < 0 || config.input_scale >= config.n_scales) {
    throw InvalidSkeleton("input scale lies outside the declared scale range");
  }
  if (config.cell_types.empty()) throw InvalidSkeleton("no cell types declared");
  if (config.scaling_latency.size() != 3) {
    throw InvalidSkeleton("scaling latency needs one entry per cell type");
  }
  check_ops(config.ops, config.n_scales);
  std::set<CellType> types(config.cell_types.begin(), config.cell_types.end());
  if (types.size() != config.cell_types.size()) throw InvalidSkeleton("duplicate cell type");

  const int L = config.n_layers;
  const int S = config.n_scales;
  // alive[l][s][t]: cell (l, s, t) exists. Forward pass from the input scale.
  using Grid = std::vector<std::vector<std::array<bool, 3>>>;
  Grid alive(L + 1, std::vector<std::array<bool, 3>>(S, {false, false, false}));
  std::vector<std::vector<bool>> reach(L + 1, std::vector<bool>(S, false));
  reach[0][config.input_scale] = true;
  for (int l = 1; l <= L; ++l) {
    for (int s_in = 0; s_in < S; ++s_in) {
      if (!reach[l - 1][s_in]) continue;
      for (CellType t : types) {
        const int s = s_in + scale_delta(t);
        if (s < 0 || s >= S) continue;
        alive[l][s][static_cast<int>(t)] = true;
        reach[l][s] = true;
      }
    }
  }
  // Backward pass: drop cells that cannot continue to the last layer.
  std::vector<std::vector<bool>> feeds(L + 1, std::vector<bool>(S, false));
  for (int s = 0; s < S; ++s) feeds[L][s] = reach[L][s];
  for (int l = L; l >= 1; --l) {
    for (int s = 0; s < S; ++s) {
      for (int t = 0; t < 3; ++t) {
        if (!alive[l][s][t]) continue;
        if (!feeds[l][s]) {
          alive[l][s][t] = false;
          continue;
        }
        feeds[l - 1][s - scale_delta(static_cast<CellType>(t))] = true;
      }
    }
  }

  std::vector<CellTemplate> cells;
  std::map<std::tuple<int, int, int>, NodeId> node_of;
  for (int l = 1; l <= L; ++l) {
    bool any = false;
    for (int s = 0; s < S; ++s) {
      for (int t = 0; t < 3; ++t) {
        if (!alive[l][s][t]) continue;
        any = true;
        CellTemplate c;
        c.layer = l;
        c.scale = s;
        c.type = static_cast<CellType>(t);
        c.n_tensors = config.n_tensors;
        c.scaling_latency = config.scaling_latency[t];
        cells.push_back(c);
        node_of[{l, s, t}] = cells.size();
      }
    }
    if (!any) {
      throw InvalidSkeleton("layer " + std::to_string(l) +
                            " is empty: a contracting/expanding transition would leave the "
                            "declared scale range");
    }
  }
  // cells are generated in sorted order, so node ids here are final.
  const NodeId output = cells.size() + 1;
  std::vector<Transition> edges;
  for (const auto& c : cells) {
    const NodeId to = node_of[{c.layer, c.scale, static_cast<int>(c.type)}];
    if (c.layer == 1) {
      if (c.input_scale() == config.input_scale) edges.push_back({0, to});
      continue;
    }
    for (int t = 0; t < 3; ++t) {
      auto it = node_of.find({c.layer - 1, c.input_scale(), t});
      if (it != node_of.end()) edges.push_back({it->second, to});
    }
  }
  for (const auto& c : cells) {
    if (c.layer == L) edges.push_back({node_of[{c.layer, c.scale, static_cast<int>(c.type)}], output});
  }
  return SupernetTopology::assemble(L, S, config.n_tensors, config.ops, std::move(cells),
                                    std::move(edges));
}

std::vector<CellPath> enumerate_paths(const SupernetTopology& topology, std::uint64_t cap) {
  const std::uint64_t total = topology.path_count();
  if (total > cap) {
    throw PathLimitExceeded("supernet has " + std::to_string(total) + " paths, above the cap of " +
                            std::to_string(cap) + "; use sampled decoding");
  }
  std::vector<CellPath> paths;
  paths.reserve(static_cast<std::size_t>(total));
  CellPath current;
  current.reserve(topology.n_layers());
  const auto& edges = topology.edges();
  // Iterative DFS; out-edges are sorted by target, so output is lexicographic.
  struct Frame {
    NodeId node;
    std::size_t next;
  };
  std::vector<Frame> stack{{topology.input_node(), 0}};
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.node == topology.output_node()) {
      paths.push_back(current);
      stack.pop_back();
      continue;
    }
    const auto out = topology.out_edges(f.node);
    if (f.next == out.size()) {
      if (topology.is_cell(f.node)) current.pop_back();
      stack.pop_back();
      continue;
    }
    const NodeId to = edges[out[f.next++]].to;
    if (topology.is_cell(to)) current.push_back(SupernetTopology::node_cell(to));
    stack.push_back({to, 0});
  }
  return paths;
}

std::size_t find_edge(const SupernetTopology& topology, NodeId from, NodeId to) {
  for (std::size_t k : topology.out_edges(from)) {
    if (topology.edges()[k].to == to) return k;
  }
  return kNoEdge;
}

ArchParams::ArchParams(const SupernetTopology& topology, std::vector<double> values)
    : values_(std::move(values)), topology_hash_(topology.hash()) {
  if (values_.size() != topology.param_count()) {
    throw ConfigError("architecture parameter count " + std::to_string(values_.size()) +
                      " does not match the topology (" + std::to_string(topology.param_count()) +
                      ")");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw ConfigError("non-finite architecture parameter");
  }
}

ArchParams init_arch_params(const SupernetTopology& topology, const InitConfig& init,
                            std::uint64_t seed) {
  std::vector<double> values(topology.param_count(), 0.0);
  if (init.policy == InitPolicy::uniform_noise) {
    Rng rng(seed);
    for (double& v : values) v = rng.uniform(-init.scale, init.scale);
  }
  return ArchParams(topology, std::move(values));
}

std::string param_key(const SupernetTopology& topology, std::size_t k) {
  auto node_name = [&](NodeId node) -> std::string {
    if (node == topology.input_node()) return "input";
    if (node == topology.output_node()) return "output";
    return topology.cell(SupernetTopology::node_cell(node)).id();
  };
  if (k >= topology.n_cell_coeffs()) {
    const auto& e = topology.edges()[k - topology.n_cell_coeffs()];
    return "edge/" + node_name(e.from) + "->" + node_name(e.to);
  }
  const std::size_t c = k / topology.cell_block_size();
  std::size_t rest = k % topology.cell_block_size();
  const std::size_t n_ops = topology.n_ops();
  int i = 1;
  while (rest >= topology.group_size(i)) {
    rest -= topology.group_size(i);
    ++i;
  }
  const std::size_t j = rest / n_ops;
  const std::size_t o = rest % n_ops;
  return topology.cell(c).id() + "/i" + std::to_string(i) + "/j" + std::to_string(j) + "/" +
         topology.ops()[o].id;
}

}  // namespace rtdnas
