#pragma once

// p-persistent CSMA contention with RTS/CTS reservation.
// Idle-slot and collision counts are kept in slots; they are converted to
// seconds only inside mean_contention().

#include <cmath>
#include <stdexcept>

#include "mfdc/core.hpp"

namespace mfdc::contention {

/// Outcome probabilities of one generic contention slot.
struct SlotProbs {
  double succ = 0.0;
  double idle = 0.0;
  double coll = 0.0;
};

struct ContentionBreakdown {
  double mean_idle_slots = 0.0; // per idle period
  double mean_collisions = 0.0;
  double t_succ = 0.0;
  double t_coll = 0.0;
  double mean_contention = 0.0; // s
  double overhead = 0.0;        // s
};

namespace detail {
inline void require(int n, double p) {
  if (n < 1) throw std::invalid_argument("contention: n must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("contention: p must lie in (0,1)");
}
} // namespace detail

inline SlotProbs slot_probs(int n, double p) {
  detail::require(n, p);
  SlotProbs s;
  s.succ = n * p * std::pow(1.0 - p, n - 1);
  s.idle = std::pow(1.0 - p, n);
  s.coll = n == 1 ? 0.0 : std::max(0.0, 1.0 - s.succ - s.idle);
  return s;
}

/// Ratio P_coll / (1 - P_idle): chance a busy slot is a collision.
inline double collision_ratio(int n, double p) {
  const auto s = slot_probs(n, p);
  return s.coll / (1.0 - s.idle);
}

/// pmf of the number of collisions before the successful reservation.
inline double collision_count_pmf(int n, double p, int x) {
  if (x < 0) throw std::invalid_argument("collision_count_pmf: x must be >= 0");
  const double r = collision_ratio(n, p);
  return std::pow(r, x) * (1.0 - r);
}

/// pmf of the number of consecutive idle slots preceding a busy slot.
inline double idle_run_pmf(int n, double p, int x) {
  if (x < 0) throw std::invalid_argument("idle_run_pmf: x must be >= 0");
  const double idle = slot_probs(n, p).idle;
  return std::pow(idle, x) * (1.0 - idle);
}

inline ContentionBreakdown mean_contention(int n, double p, const MacTimings& t) {
  const auto s = slot_probs(n, p);
  ContentionBreakdown b;
  b.mean_idle_slots = s.idle / (1.0 - s.idle);
  b.mean_collisions = n == 1 ? 0.0 : (1.0 - s.idle) / s.succ - 1.0;
  b.t_succ = t.t_succ();
  b.t_coll = t.t_coll();
  b.mean_contention = b.mean_collisions * b.t_coll +
                      b.mean_idle_slots * t.slot * (b.mean_collisions + 1.0) + b.t_succ;
  b.overhead = b.mean_contention + t.tail();
  return b;
}

} // namespace mfdc::contention
