#pragma once

#include <cstdint>
#include <vector>

#include "rtdnas/decode.hpp"
#include "rtdnas/gradient.hpp"
#include "rtdnas/latency.hpp"
#include "rtdnas/loss.hpp"
#include "rtdnas/relaxation.hpp"
#include "rtdnas/supernet.hpp"

namespace rtdnas {

enum class LrSchedule { cosine, linear };

struct OptimizerConfig {
  double momentum = 0.9;
  double lr_start = 0.01;
  double lr_end = 0.001;
  double weight_decay = 0.0003;  // decoupled
  int epochs = 40;
  int steps_per_epoch = 50;      // gradient steps per epoch
  LrSchedule lr_schedule = LrSchedule::cosine;
  double grad_clip_norm = 5.0;   // rescale larger gradients to this L2 norm; 0 disables
  InitConfig init;

  void validate() const;
  // Annealed rate for a 0-based epoch.
  double learning_rate(int epoch) const;
};

struct EpochRecord {
  int outer_iteration = 0;
  int epoch = 0;
  double learning_rate = 0.0;
  double latency_ub_ms = 0.0;
  LossTerms terms;  // evaluated at the end of the epoch
};

struct OuterRecord {
  double latency_ub_ms = 0.0;
  double decoded_latency_ms = 0.0;
  double throughput_fps = 0.0;
  bool satisfied = false;
};

struct SearchReport {
  std::vector<EpochRecord> epochs;
  std::vector<OuterRecord> outer;
  ArchParams final_params;
  std::size_t clamp_events = 0;
  bool feasible = true;
};

// Momentum descent on the total loss. Deterministic for fixed inputs; the
// seed only drives parameter initialisation. Throws SearchDiverged on a
// non-finite loss term.
SearchReport run_search(const SupernetTopology& topology, const SurrogateModel& model,
                        const LatencyModel& latency_model, const LossConfig& loss_cfg,
                        const OptimizerConfig& opt_cfg, std::uint64_t seed);

// Same as run_search but starting from explicit parameters.
SearchReport run_search_from(const SupernetTopology& topology, const SurrogateModel& model,
                             const LatencyModel& latency_model, const LossConfig& loss_cfg,
                             const OptimizerConfig& opt_cfg, ArchParams start);

struct OuterLoopConfig {
  double throughput_min_fps = 22.0;
  double shrink_factor = 0.9;
  int max_iterations = 10;
  std::size_t decode_paths = 1;  // paths of the greedy decode checked against the constraint

  void validate() const;
};

// Thrown when the outer loop runs out of iterations; carries the full report.
class InfeasibleSearch : public InfeasibleConstraint {
 public:
  InfeasibleSearch(const std::string& what, SearchReport report)
      : InfeasibleConstraint(what), report_(std::move(report)) {}
  const SearchReport& report() const { return report_; }

 private:
  SearchReport report_;
};

// Re-runs the search with a budget shrunk by shrink_factor until the decoded
// network reaches throughput_min_fps.
SearchReport constrained_search(const SupernetTopology& topology, const SurrogateModel& model,
                                const LatencyModel& latency_model, const LossConfig& loss_cfg,
                                const OptimizerConfig& opt_cfg, const OuterLoopConfig& outer_cfg,
                                std::uint64_t seed);

}  // namespace rtdnas
