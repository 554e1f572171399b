#pragma once

#include <vector>

#include "rtdnas/latency.hpp"
#include "rtdnas/loss.hpp"
#include "rtdnas/relaxation.hpp"
#include "rtdnas/supernet.hpp"

namespace rtdnas {

struct LossEvaluation {
  LossTerms terms;
  std::vector<double> gradient;  // keyed like ArchParams
};

LossTerms evaluate_loss(const ArchParams& params, const SupernetTopology& topology,
                        const SurrogateModel& model, const LatencyModel& latency_model,
                        const LossConfig& cfg);

// Loss terms and the analytic gradient of the total loss in one pass.
// The longest-path max uses the critical path picked by longest_path(), so
// at exact ties this is one subgradient.
LossEvaluation evaluate_loss_and_gradient(const ArchParams& params, const SupernetTopology& topology,
                                          const SurrogateModel& model,
                                          const LatencyModel& latency_model, const LossConfig& cfg);

std::vector<double> grad_arch_params(const ArchParams& params, const SupernetTopology& topology,
                                     const SurrogateModel& model, const LatencyModel& latency_model,
                                     const LossConfig& cfg);

// d expected_network_latency / d params.
std::vector<double> expected_latency_gradient(const ArchParams& params,
                                              const SupernetTopology& topology,
                                              const LatencyModel& latency_model);

}  // namespace rtdnas
