#include "rtdnas/pareto.hpp"

#include <algorithm>
#include <numeric>

namespace rtdnas {

bool dominates(const ParetoPoint& a, const ParetoPoint& b) {
  return a.score >= b.score && a.latency_ms <= b.latency_ms &&
         (a.score > b.score || a.latency_ms < b.latency_ms);
}

std::vector<std::size_t> pareto_frontier(const std::vector<ParetoPoint>& points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].latency_ms != points[b].latency_ms) return points[a].latency_ms < points[b].latency_ms;
    return points[a].score > points[b].score;
  });
  // Sweep by increasing latency: a point survives when its score beats every
  // faster point, or exactly ties the current frontier (same latency and score).
  std::vector<std::size_t> front;
  for (std::size_t idx : order) {
    const ParetoPoint& p = points[idx];
    if (front.empty()) {
      front.push_back(idx);
      continue;
    }
    const ParetoPoint& last = points[front.back()];
    if (p.score > last.score || (p.score == last.score && p.latency_ms == last.latency_ms)) {
      front.push_back(idx);
    }
  }
  return front;
}

}  // namespace rtdnas
