#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rtdnas/supernet.hpp"

namespace rtdnas {

// Joint softmax weights over (source j, op o) for every (cell, target i),
// stored in the cell-coefficient layout of the topology.
struct MixtureWeights {
  std::vector<double> values;

  // Weights of one (cell, i) group, i * |O| entries ordered by (j, o).
  std::span<const double> group(const SupernetTopology& t, std::size_t c, int i) const {
    return std::span<const double>(values).subspan(t.group_offset(c, i), t.group_size(i));
  }
};

MixtureWeights mixture_weights(const ArchParams& params, const SupernetTopology& topology);

// Numerically stable softmax (max-subtracted) of one coefficient group.
void softmax(std::span<const double> logits, std::span<double> out);

// Synthetic accuracy stand-in: quadratic distance between mixture weights
// and an ideal profile.
struct SurrogateModel {
  std::vector<double> target;  // cell-coefficient layout, each group sums to 1
  double sharpness = 1.0;

  // Throws ConfigError when sizes or group sums are inconsistent.
  void validate(const SupernetTopology& topology) const;
};

struct SurrogateGenerator {
  std::uint64_t seed = 1;
  double sharpness = 1.0;
  double quality_weight = 1.0;  // scales op quality in the target logits
  double noise = 0.5;           // std-dev of per-entry logit noise
  double temperature = 1.0;
};

// Random target profile: softmax over (quality_weight * quality(o) + noise * z) / temperature.
SurrogateModel generate_surrogate(const SupernetTopology& topology, const SurrogateGenerator& gen);

double surrogate_loss(const MixtureWeights& weights, const SurrogateModel& model);

// d surrogate_loss / d coefficients, cell-coefficient region only.
std::vector<double> surrogate_loss_gradient(const ArchParams& params,
                                            const SupernetTopology& topology,
                                            const SurrogateModel& model);

// Selected (source, op) for one produced tensor of a decoded cell.
struct EdgeChoice {
  int source = 0;
  std::size_t op = 0;
  friend bool operator==(const EdgeChoice&, const EdgeChoice&) = default;
};

// choices[i - 1] for tensors i = 1..N.
using CellSelection = std::vector<EdgeChoice>;

// Per-cell argmax of the mixture weights; ties go to the lowest (j, o).
std::vector<CellSelection> argmax_selections(const SupernetTopology& topology,
                                             const MixtureWeights& weights);

// Normalised alignment of a discrete cell with the target profile, in (0, 1]:
// mean over tensors of target(selected) / max target of that tensor.
double cell_alignment(const SupernetTopology& topology, const SurrogateModel& model,
                      std::size_t c, const CellSelection& selection);

}  // namespace rtdnas
