#pragma once

#include <string>
#include <vector>

namespace rtdnas {

struct ParetoPoint {
  std::string id;
  double score = 0.0;  // higher is better
  double latency_ms = 0.0;
  double throughput_fps = 0.0;
  std::string source;  // search, random, greedy, ga
};

struct ValidRegion {
  double max_latency_ms = 50.0;
  double min_throughput_fps = 22.0;

  bool contains(const ParetoPoint& p) const {
    return p.latency_ms <= max_latency_ms && p.throughput_fps >= min_throughput_fps;
  }
};

// a dominates b: score >= and latency <=, strictly better in at least one.
bool dominates(const ParetoPoint& a, const ParetoPoint& b);

// Indices of the non-dominated points, ascending by latency (ties by
// descending score, then input order).
std::vector<std::size_t> pareto_frontier(const std::vector<ParetoPoint>& points);

}  // namespace rtdnas
