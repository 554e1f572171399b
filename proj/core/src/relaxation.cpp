#include "rtdnas/relaxation.hpp"

#include <algorithm>
#include <cmath>

#include "rtdnas/random.hpp"

namespace rtdnas {

void softmax(std::span<const double> logits, std::span<double> out) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - m);
    sum += out[k];
  }
  for (std::size_t k = 0; k < logits.size(); ++k) out[k] /= sum;
}

MixtureWeights mixture_weights(const ArchParams& params, const SupernetTopology& topology) {
  MixtureWeights w;
  w.values.resize(topology.n_cell_coeffs());
  const auto v = params.values();
  for (std::size_t c = 0; c < topology.n_cells(); ++c) {
    for (int i = 1; i <= topology.n_tensors(); ++i) {
      const std::size_t off = topology.group_offset(c, i);
      const std::size_t n = topology.group_size(i);
      softmax(v.subspan(off, n), std::span<double>(w.values).subspan(off, n));
    }
  }
  return w;
}

void SurrogateModel::validate(const SupernetTopology& topology) const {
  if (target.size() != topology.n_cell_coeffs()) {
    throw ConfigError("surrogate target profile has " + std::to_string(target.size()) +
                      " entries, topology expects " + std::to_string(topology.n_cell_coeffs()));
  }
  if (!(sharpness > 0.0) || !std::isfinite(sharpness)) {
    throw ConfigError("surrogate sharpness must be a positive finite number");
  }
  for (std::size_t c = 0; c < topology.n_cells(); ++c) {
    for (int i = 1; i <= topology.n_tensors(); ++i) {
      double sum = 0.0;
      const std::size_t off = topology.group_offset(c, i);
      for (std::size_t k = 0; k < topology.group_size(i); ++k) {
        const double t = target[off + k];
        if (!std::isfinite(t) || t < 0.0) throw ConfigError("surrogate target entries must be >= 0");
        sum += t;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("surrogate targets of " + topology.cell(c).id() + "/i" +
                          std::to_string(i) + " do not sum to 1");
      }
    }
  }
}

SurrogateModel generate_surrogate(const SupernetTopology& topology, const SurrogateGenerator& gen) {
  SurrogateModel model;
  model.sharpness = gen.sharpness;
  model.target.resize(topology.n_cell_coeffs());
  Rng rng(gen.seed);
  const std::size_t n_ops = topology.n_ops();
  std::vector<double> logits;
  for (std::size_t c = 0; c < topology.n_cells(); ++c) {
    for (int i = 1; i <= topology.n_tensors(); ++i) {
      const std::size_t n = topology.group_size(i);
      logits.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        const double q = topology.ops()[k % n_ops].quality;
        logits[k] = (gen.quality_weight * q + gen.noise * rng.normal()) / gen.temperature;
      }
      softmax(logits, std::span<double>(model.target).subspan(topology.group_offset(c, i), n));
    }
  }
  return model;
}

double surrogate_loss(const MixtureWeights& weights, const SurrogateModel& model) {
  if (weights.values.size() != model.target.size()) {
    throw ConfigError("surrogate model and mixture weights cover different key sets");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < weights.values.size(); ++k) {
    const double d = weights.values[k] - model.target[k];
    sum += d * d;
  }
  return model.sharpness * sum;
}

std::vector<double> surrogate_loss_gradient(const ArchParams& params,
                                            const SupernetTopology& topology,
                                            const SurrogateModel& model) {
  const MixtureWeights w = mixture_weights(params, topology);
  std::vector<double> grad(topology.n_cell_coeffs(), 0.0);
  for (std::size_t c = 0; c < topology.n_cells(); ++c) {
    for (int i = 1; i <= topology.n_tensors(); ++i) {
      const std::size_t off = topology.group_offset(c, i);
      const std::size_t n = topology.group_size(i);
      // dL/dw_k = 2 s (w_k - t_k); softmax Jacobian: dL/dv_m = w_m (g_m - sum_k w_k g_k).
      double mean = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        mean += w.values[off + k] * 2.0 * model.sharpness * (w.values[off + k] - model.target[off + k]);
      }
      for (std::size_t k = 0; k < n; ++k) {
        const double g = 2.0 * model.sharpness * (w.values[off + k] - model.target[off + k]);
        grad[off + k] = w.values[off + k] * (g - mean);
      }
    }
  }
  return grad;
}

std::vector<CellSelection> argmax_selections(const SupernetTopology& topology,
                                             const MixtureWeights& weights) {
  const std::size_t n_ops = topology.n_ops();
  std::vector<CellSelection> out(topology.n_cells());
  for (std::size_t c = 0; c < topology.n_cells(); ++c) {
    out[c].resize(topology.n_tensors());
    for (int i = 1; i <= topology.n_tensors(); ++i) {
      const auto g = weights.group(topology, c, i);
      const std::size_t best = static_cast<std::size_t>(std::max_element(g.begin(), g.end()) - g.begin());
      out[c][i - 1] = EdgeChoice{static_cast<int>(best / n_ops), best % n_ops};
    }
  }
  return out;
}

double cell_alignment(const SupernetTopology& topology, const SurrogateModel& model,
                      std::size_t c, const CellSelection& selection) {
  const std::size_t n_ops = topology.n_ops();
  double sum = 0.0;
  for (int i = 1; i <= topology.n_tensors(); ++i) {
    const std::size_t off = topology.group_offset(c, i);
    const std::size_t n = topology.group_size(i);
    const double best = *std::max_element(model.target.begin() + off, model.target.begin() + off + n);
    const auto& e = selection[i - 1];
    sum += model.target[off + static_cast<std::size_t>(e.source) * n_ops + e.op] / best;
  }
  return sum / topology.n_tensors();
}

}  // namespace rtdnas
