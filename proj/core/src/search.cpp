#include "rtdnas/search.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace rtdnas {

void OptimizerConfig::validate() const {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optimizer.momentum must be in [0,1)");
  if (!(lr_start > 0.0) || !(lr_end > 0.0)) throw ConfigError("optimizer learning rates must be > 0");
  if (lr_end > lr_start) throw ConfigError("optimizer.lr_end must not exceed optimizer.lr_start");
  if (!(weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay must be >= 0");
  if (epochs < 1) throw ConfigError("optimizer.epochs must be >= 1");
  if (steps_per_epoch < 1) throw ConfigError("optimizer.steps_per_epoch must be >= 1");
  if (!(grad_clip_norm >= 0.0)) throw ConfigError("optimizer.grad_clip_norm must be >= 0");
}

double OptimizerConfig::learning_rate(int epoch) const {
  if (epochs <= 1) return lr_start;
  const double progress = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  switch (lr_schedule) {
    case LrSchedule::cosine:
      return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(std::numbers::pi * progress));
    case LrSchedule::linear:
      return lr_start + (lr_end - lr_start) * progress;
  }
  return lr_start;
}

void OuterLoopConfig::validate() const {
  if (!(throughput_min_fps > 0.0)) throw ConfigError("constraints.throughput_min_fps must be > 0");
  if (!(shrink_factor > 0.0 && shrink_factor < 1.0)) throw ConfigError("constraints.shrink_factor must be in (0,1)");
  if (max_iterations < 1) throw ConfigError("constraints.max_outer_iterations must be >= 1");
  if (decode_paths < 1) throw ConfigError("constraints.decode_paths must be >= 1");
}

namespace {

void check_finite(const LossTerms& t, int epoch) {
  auto fail = [epoch](const char* term) {
    throw SearchDiverged(epoch, term,
                         "search diverged at epoch " + std::to_string(epoch) + ": " + term + " is not finite");
  };
  if (!std::isfinite(t.accuracy)) fail("L_a");
  if (!std::isfinite(t.latency_ms)) fail("L_t");
  if (!std::isfinite(t.penalty)) fail("penalty");
  if (!std::isfinite(t.total)) fail("total");
}

}  // namespace

SearchReport run_search_from(const SupernetTopology& topology, const SurrogateModel& model,
                             const LatencyModel& latency_model, const LossConfig& loss_cfg,
                             const OptimizerConfig& opt_cfg, ArchParams start) {
  loss_cfg.validate();
  opt_cfg.validate();
  model.validate(topology);
  latency_model.validate(topology);
  if (!start.matches(topology)) throw ConfigError("initial parameters do not match the topology");

  SearchReport report;
  ArchParams params = std::move(start);
  std::vector<double> velocity(params.size(), 0.0);
  for (int epoch = 0; epoch < opt_cfg.epochs; ++epoch) {
    const double lr = opt_cfg.learning_rate(epoch);
    for (int step = 0; step < opt_cfg.steps_per_epoch; ++step) {
      const LossEvaluation ev = evaluate_loss_and_gradient(params, topology, model, latency_model, loss_cfg);
      check_finite(ev.terms, epoch);
      if (ev.terms.clamped) ++report.clamp_events;
      double scale = 1.0;
      if (opt_cfg.grad_clip_norm > 0.0) {
        double sq = 0.0;
        for (double g : ev.gradient) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > opt_cfg.grad_clip_norm) scale = opt_cfg.grad_clip_norm / norm;
      }
      const double decay = 1.0 - lr * opt_cfg.weight_decay;
      auto v = params.values();
      for (std::size_t m = 0; m < v.size(); ++m) {
        velocity[m] = opt_cfg.momentum * velocity[m] - lr * scale * ev.gradient[m];
        v[m] = v[m] * decay + velocity[m];
      }
    }
    for (double x : params.values()) {
      if (!std::isfinite(x)) throw SearchDiverged(epoch, "params", "search diverged at epoch " + std::to_string(epoch) + ": non-finite coefficient");
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr;
    rec.latency_ub_ms = loss_cfg.latency_ub_ms;
    rec.terms = evaluate_loss(params, topology, model, latency_model, loss_cfg);
    check_finite(rec.terms, epoch);
    if (rec.terms.clamped) ++report.clamp_events;
    report.epochs.push_back(rec);
  }
  report.final_params = std::move(params);
  return report;
}

SearchReport run_search(const SupernetTopology& topology, const SurrogateModel& model,
                        const LatencyModel& latency_model, const LossConfig& loss_cfg,
                        const OptimizerConfig& opt_cfg, std::uint64_t seed) {
  return run_search_from(topology, model, latency_model, loss_cfg, opt_cfg,
                         init_arch_params(topology, opt_cfg.init, seed));
}

SearchReport constrained_search(const SupernetTopology& topology, const SurrogateModel& model,
                                const LatencyModel& latency_model, const LossConfig& loss_cfg,
                                const OptimizerConfig& opt_cfg, const OuterLoopConfig& outer_cfg,
                                std::uint64_t seed) {
  outer_cfg.validate();
  SearchReport combined;
  combined.feasible = false;
  LossConfig cfg = loss_cfg;
  for (int it = 0; it < outer_cfg.max_iterations; ++it) {
    SearchReport run = run_search(topology, model, latency_model, cfg, opt_cfg, seed);
    for (auto& rec : run.epochs) {
      rec.outer_iteration = it;
      combined.epochs.push_back(rec);
    }
    combined.clamp_events += run.clamp_events;

    const DecodeContext ctx{topology, model, latency_model, cfg.latency_ub_ms, kDefaultPathGain};
    const DecodedNetwork net = decode_greedy(ctx, run.final_params, outer_cfg.decode_paths);
    OuterRecord outer;
    outer.latency_ub_ms = cfg.latency_ub_ms;
    outer.decoded_latency_ms = net.latency_ms;
    outer.throughput_fps = net.throughput_fps;
    outer.satisfied = net.throughput_fps >= outer_cfg.throughput_min_fps && net.latency_ms <= loss_cfg.latency_ub_ms;
    combined.outer.push_back(outer);
    combined.final_params = std::move(run.final_params);
    if (outer.satisfied) {
      combined.feasible = true;
      return combined;
    }
    cfg.latency_ub_ms *= outer_cfg.shrink_factor;
  }
  throw InfeasibleSearch("constraints infeasible: throughput >= " + std::to_string(outer_cfg.throughput_min_fps) +
                             " FPS not reached within " + std::to_string(outer_cfg.max_iterations) +
                             " outer iterations",
                         std::move(combined));
}

}  // namespace rtdnas
