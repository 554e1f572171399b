#pragma once

namespace rtdnas {

struct LossConfig {
  double lambda = 100.0;          // penalty factor
  double latency_ub_ms = 50.0;    // hard real-time budget
  double penalty_temp_ms = 1.0;   // divides the penalty exponent; 1 ms is the literal form

  // Throws ConfigError when a field is out of range.
  void validate() const;
};

// Exponent beyond which exp() would overflow a double.
inline constexpr double kMaxPenaltyExponent = 700.0;

struct LossTerms {
  double accuracy = 0.0;    // L_a
  double latency_ms = 0.0;  // L_t
  double penalty = 0.0;     // lambda * exp((L_t - L_ub) / tau)
  double total = 0.0;
  bool clamped = false;     // exponent hit kMaxPenaltyExponent
};

LossTerms loss_terms(double accuracy_loss, double latency_ms, const LossConfig& cfg);

// L_a * L_t + lambda * exp((L_t - L_ub) / tau).
inline double total_loss(double accuracy_loss, double latency_ms, const LossConfig& cfg) {
  return loss_terms(accuracy_loss, latency_ms, cfg).total;
}

}  // namespace rtdnas
