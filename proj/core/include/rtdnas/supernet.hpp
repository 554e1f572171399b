#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rtdnas/errors.hpp"

namespace rtdnas {

// Output-scaling behaviour of a cell. Enumerator order is the id order used
// for lexicographic tie-breaks.
enum class CellType { expanding = 0, non_scaling = 1, contracting = 2 };

const char* to_string(CellType type);
CellType cell_type_from_string(const std::string& name);

// Scale-level change applied by a cell. Level 0 is full resolution; each
// contraction halves the feature size and moves one level up.
int scale_delta(CellType type);

struct OperationSpec {
  std::string id;
  std::string kind;
  double quality = 0.0;
  std::vector<double> latency_per_scale;  // ms, indexed by scale level
};

// One searchable cell of the supernet. `scale` is the output scale; the
// produced tensors live at input_scale() until the final scaling op.
struct CellTemplate {
  int layer = 0;
  int scale = 0;
  CellType type = CellType::non_scaling;
  int n_tensors = 1;
  double scaling_latency = 0.0;  // S_cell, ms

  int input_scale() const { return scale - scale_delta(type); }
  std::string id() const;
};

using NodeId = std::size_t;

struct Transition {
  NodeId from = 0;
  NodeId to = 0;
};

struct SkeletonConfig {
  int n_layers = 10;
  int n_scales = 4;
  int n_tensors = 3;
  int input_scale = 0;
  std::vector<CellType> cell_types = {CellType::expanding, CellType::non_scaling,
                                      CellType::contracting};
  std::vector<OperationSpec> ops;
  // S_cell per cell type, indexed by static_cast<int>(CellType).
  std::vector<double> scaling_latency = {0.0, 0.0, 0.0};
};

// Layered multi-scale grid of cells. Node 0 is the input pseudo-cell,
// nodes 1..n_cells() are real cells sorted by (layer, scale, type), and the
// last node is the output pseudo-cell. Immutable after assembly.
class SupernetTopology {
 public:
  // Validates every structural invariant; throws InvalidSkeleton otherwise.
  // `cells` may be in any order. Edge endpoints use 0 for the input,
  // k + 1 for cells[k] as given, and cells.size() + 1 for the output; they
  // are remapped onto the sorted layout.
  static SupernetTopology assemble(int n_layers, int n_scales, int n_tensors,
                                   std::vector<OperationSpec> ops,
                                   std::vector<CellTemplate> cells,
                                   std::vector<Transition> edges);

  int n_layers() const { return n_layers_; }
  int n_scales() const { return n_scales_; }
  int n_tensors() const { return n_tensors_; }
  std::size_t n_ops() const { return ops_.size(); }
  const std::vector<OperationSpec>& ops() const { return ops_; }

  std::size_t n_cells() const { return cells_.size(); }
  std::size_t n_nodes() const { return cells_.size() + 2; }
  NodeId input_node() const { return 0; }
  NodeId output_node() const { return cells_.size() + 1; }
  bool is_cell(NodeId node) const { return node >= 1 && node <= cells_.size(); }

  // Cell index c in [0, n_cells) <-> node id c + 1.
  const CellTemplate& cell(std::size_t c) const { return cells_[c]; }
  const std::vector<CellTemplate>& cells() const { return cells_; }
  static NodeId cell_node(std::size_t c) { return c + 1; }
  static std::size_t node_cell(NodeId node) { return node - 1; }
  int node_layer(NodeId node) const;

  const std::vector<Transition>& edges() const { return edges_; }
  std::span<const std::size_t> out_edges(NodeId node) const { return out_[node]; }
  std::span<const std::size_t> in_edges(NodeId node) const { return in_[node]; }
  // Cells (as indices) of one layer, 1 <= layer <= n_layers.
  std::span<const std::size_t> layer_cells(int layer) const { return layers_[layer - 1]; }

  // Coefficient layout. Every cell owns a block of |O| * N(N+1)/2 input-op
  // coefficients ordered by (i, j, o); transition coefficients follow, one
  // per edge in edge order.
  std::size_t group_size(int i) const { return static_cast<std::size_t>(i) * ops_.size(); }
  std::size_t cell_block_size() const { return block_size_; }
  std::size_t n_cell_coeffs() const { return block_size_ * cells_.size(); }
  std::size_t n_transition_coeffs() const { return edges_.size(); }
  std::size_t param_count() const { return n_cell_coeffs() + edges_.size(); }
  // Offset of the (cell, i) group inside the cell-coefficient region.
  std::size_t group_offset(std::size_t c, int i) const;
  std::size_t coeff_index(std::size_t c, int i, int j, std::size_t op) const;
  std::size_t transition_index(std::size_t edge) const { return n_cell_coeffs() + edge; }

  // Number of input->output paths by dynamic programming (saturates at
  // UINT64_MAX).
  std::uint64_t path_count() const;

  // Stable 64-bit digest of the structure, op ids and latency tables.
  std::uint64_t hash() const { return hash_; }

 private:
  std::uint64_t compute_hash() const;

  int n_layers_ = 0;
  int n_scales_ = 0;
  int n_tensors_ = 0;
  std::vector<OperationSpec> ops_;
  std::vector<CellTemplate> cells_;
  std::vector<Transition> edges_;
  std::vector<std::vector<std::size_t>> out_;
  std::vector<std::vector<std::size_t>> in_;
  std::vector<std::vector<std::size_t>> layers_;
  std::size_t block_size_ = 0;
  std::uint64_t hash_ = 0;
};

// Grid skeleton: for every layer, scale and allowed type, a cell whose input
// and output scales are both inside [0, n_scales). Cells unreachable from the
// input scale are pruned; every layer-L cell feeds the output.
SupernetTopology build_topology(const SkeletonConfig& config);

// A path lists one cell index per layer, input to output.
using CellPath = std::vector<std::size_t>;

inline constexpr std::uint64_t kDefaultPathCap = 100000;

// Every input->output path exactly once, lexicographic in cell order.
// Throws PathLimitExceeded when path_count() > cap.
std::vector<CellPath> enumerate_paths(const SupernetTopology& topology,
                                      std::uint64_t cap = kDefaultPathCap);

inline constexpr std::size_t kNoEdge = static_cast<std::size_t>(-1);

// Edge index joining two nodes, or kNoEdge.
std::size_t find_edge(const SupernetTopology& topology, NodeId from, NodeId to);

// All relaxation coefficients laid out as SupernetTopology describes.
class ArchParams {
 public:
  ArchParams() = default;
  ArchParams(const SupernetTopology& topology, std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  std::uint64_t topology_hash() const { return topology_hash_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }

  bool matches(const SupernetTopology& topology) const {
    return values_.size() == topology.param_count() && topology_hash_ == topology.hash();
  }

  friend bool operator==(const ArchParams&, const ArchParams&) = default;

 private:
  std::vector<double> values_;
  std::uint64_t topology_hash_ = 0;
};

enum class InitPolicy { zeros, uniform_noise };

struct InitConfig {
  InitPolicy policy = InitPolicy::uniform_noise;
  double scale = 1e-3;  // half-width of the uniform noise
};

ArchParams init_arch_params(const SupernetTopology& topology, const InitConfig& init,
                            std::uint64_t seed);

// Human-readable key of one coefficient, e.g. "l1.s0.N/i2/j0/sep_conv" or
// "edge/input->l1.s0.N".
std::string param_key(const SupernetTopology& topology, std::size_t k);

}  // namespace rtdnas
