#pragma once

// Energy detection under full-duplex self-interference.

#include <cmath>
#include <stdexcept>
#include <string>

#include "mfdc/core.hpp"
#include "mfdc/quadrature.hpp"

namespace mfdc::sensing {

/// Absolute tolerance of the averaged-detection integral.
inline constexpr double kQuadTol = 1e-9;
/// Round-trip accuracy of the solved threshold.
inline constexpr double kThresholdTol = 1e-8;

struct SensingPoint {
  double sensing_time = 0.0;
  double sensing_power = 0.0;
  double threshold = 0.0;
  double false_alarm = 0.0;
  double avg_detection = 0.0;
};

/// Standard Gaussian tail probability.
inline double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

inline double self_interference(double p_sen, const SelfInterference& si) {
  if (si.zeta == 0.0) return 0.0;
  return si.zeta * std::pow(p_sen, si.xi);
}

/// PU SINR at the sensing receiver, gamma_PS = P_p / (N0 + I).
inline double pu_sinr(double pu_power, double p_sen, const SelfInterference& si) {
  return pu_power / (kNoisePower + self_interference(p_sen, si));
}

/// False-alarm probability when the PU stays idle for the whole sensing window.
inline double false_alarm_h00(double eps, double t_s, double p_sen, double f_s,
                              const SelfInterference& si) {
  const double floor = kNoisePower + self_interference(p_sen, si);
  return q_function((eps / floor - 1.0) * std::sqrt(f_s * t_s));
}

/// Detection probability when the PU turns on t seconds into a window of length t_s.
inline double detection_h01(double t, double eps, double t_s, double p_sen, double f_s,
                            double pu_power, const SelfInterference& si) {
  if (!(t >= 0.0 && t <= t_s))
    throw std::invalid_argument("detection_h01: t must lie in [0, t_s]");
  const double floor = kNoisePower + self_interference(p_sen, si);
  const double gamma = pu_power / floor;
  const double present = (t_s - t) / t_s;
  const double num = (eps / floor - present * gamma - 1.0) * std::sqrt(f_s * t_s);
  const double den = std::sqrt(present * (gamma + 1.0) * (gamma + 1.0) + t / t_s);
  return q_function(num / den);
}

/// Density of the PU arrival time conditioned on it falling inside [0, t_s].
inline double arrival_pdf_in_window(double t, double t_s, double mean_idle) {
  return std::exp(-t / mean_idle) / (mean_idle * -std::expm1(-t_s / mean_idle));
}

/// Detection probability averaged over a PU arrival inside the sensing window.
inline double avg_detection(double eps, double t_s, double p_sen, double f_s,
                            const ChannelModel& ch, const SelfInterference& si) {
  if (!(t_s > 0.0)) throw std::invalid_argument("avg_detection: t_s must be > 0");
  // Integrate over u = t / t_s so the integrand stays O(1).
  auto integrand = [&](double u) {
    const double t = u * t_s;
    return detection_h01(std::min(t, t_s), eps, t_s, p_sen, f_s, ch.pu_power, si) *
           arrival_pdf_in_window(t, t_s, ch.mean_idle) * t_s;
  };
  return quad::integrate_or_throw(integrand, 0.0, 1.0, kQuadTol, "average detection probability");
}

/// Finds the threshold meeting the averaged detection target with equality.
inline SensingPoint solve_threshold(double t_s, double p_sen, double f_s, const ChannelModel& ch,
                                    const SelfInterference& si, double target) {
  if (!(target > 0.0 && target < 1.0))
    throw std::invalid_argument("solve_threshold: target must lie in (0,1)");
  auto pd = [&](double eps) { return avg_detection(eps, t_s, p_sen, f_s, ch, si); };

  const double interference = self_interference(p_sen, si);
  const double gamma = pu_sinr(ch.pu_power, p_sen, si);
  double lo = kNoisePower;
  double hi = kNoisePower + interference + (1.0 + gamma) * 10.0;
  double pd_lo = pd(lo);
  for (int i = 0; pd_lo < target; ++i) {
    if (i == 200) throw NumericalError("solve_threshold: cannot bracket threshold from below");
    hi = lo;
    lo *= 0.5;
    pd_lo = pd(lo);
  }
  double span = hi - (kNoisePower + interference);
  for (int i = 0; pd(hi) > target; ++i) {
    if (i == 200) throw NumericalError("solve_threshold: cannot bracket threshold from above");
    lo = hi;
    span *= 2.0;
    hi = kNoisePower + interference + span;
  }

  double eps = 0.5 * (lo + hi);
  double value = pd(eps);
  for (int i = 0; i < 200 && std::abs(value - target) > 1e-11; ++i) {
    if (value > target) lo = eps;
    else hi = eps;
    const double next = 0.5 * (lo + hi);
    if (next == eps) break;
    eps = next;
    value = pd(eps);
  }
  if (std::abs(value - target) > kThresholdTol)
    throw NumericalError("solve_threshold: bisection stalled at |Pd - target| = " +
                         std::to_string(std::abs(value - target)));
  return SensingPoint{t_s, p_sen, eps, false_alarm_h00(eps, t_s, p_sen, f_s, si), value};
}

inline SensingPoint solve_threshold(const ChannelSetup& s) {
  return solve_threshold(s.proto.sensing_time, s.proto.sensing_power, s.sensing.sampling_freq,
                         s.channel, s.si, s.sensing.target_detection);
}

} // namespace mfdc::sensing
