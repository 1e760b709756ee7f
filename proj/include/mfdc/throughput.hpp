#pragma once

// Data-phase bit accounting, per-channel throughput and the network
// throughput average over all ways the SUs can spread across channels.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mfdc/contention.hpp"
#include "mfdc/core.hpp"
#include "mfdc/quadrature.hpp"
#include "mfdc/sensing.hpp"

namespace mfdc::throughput {

inline constexpr double kQuadTol = 1e-9;
inline constexpr double kMaxPartitions = 1e7;

/// Expected bits/Hz of one data phase split by PU behaviour:
/// 1 = PU idle throughout, 2 = PU arrives during transmission,
/// 3 = PU arrives during sensing.
struct CaseBits {
  double b1 = 0.0;
  double b2 = 0.0;
  double b3 = 0.0;
  double case_probs[3] = {0.0, 0.0, 0.0};

  double total() const { return b1 + b2 + b3; }
};

/// Spectral efficiencies of the four link states.
struct Rates {
  double sensing;         // FD sensing stage, PU idle
  double sensing_pu;      // FD sensing stage, PU active
  double data;            // transmission stage, PU idle
  double data_pu;         // transmission stage, PU active
};

inline Rates link_rates(double p_sen, double p_dat, double pu_power) {
  const double pu = kNoisePower + pu_power;
  return Rates{std::log2(1.0 + p_sen / kNoisePower), std::log2(1.0 + p_sen / pu),
               std::log2(1.0 + p_dat / kNoisePower), std::log2(1.0 + p_dat / pu)};
}

inline CaseBits channel_bits(const ChannelModel& ch, const ProtocolConfig& cfg,
                             const sensing::SensingPoint& sp, double f_s,
                             const SelfInterference& si) {
  const double T = cfg.frame;
  const double Ts = sp.sensing_time;
  const double tau = ch.mean_idle;
  const Rates r = link_rates(sp.sensing_power, cfg.data_power, ch.pu_power);
  const double keep = 1.0 - sp.false_alarm;
  auto arrival = [tau](double t) { return std::exp(-t / tau) / tau; };

  CaseBits out;
  out.case_probs[0] = std::exp(-T / tau);
  out.case_probs[1] = std::exp(-Ts / tau) - std::exp(-T / tau);
  out.case_probs[2] = -std::expm1(-Ts / tau);

  out.b1 = out.case_probs[0] * (Ts * r.sensing + keep * (T - Ts) * r.data);

  if (T > Ts) {
    auto case2 = [&](double t) {
      return (Ts * r.sensing + keep * ((t - Ts) * r.data + (T - t) * r.data_pu)) * arrival(t);
    };
    out.b2 = quad::integrate_or_throw(case2, Ts, T, kQuadTol, "case-2 bits");
  }

  auto case3 = [&](double t) {
    const double pd = sensing::detection_h01(std::min(t, Ts), sp.threshold, Ts, sp.sensing_power,
                                             f_s, ch.pu_power, si);
    return (t * r.sensing + (Ts - t) * r.sensing_pu + (1.0 - pd) * (T - Ts) * r.data_pu) *
           arrival(t);
  };
  out.b3 = quad::integrate_or_throw(case3, 0.0, Ts, kQuadTol, "case-3 bits");
  return out;
}

inline CaseBits channel_bits(const ChannelSetup& s, const sensing::SensingPoint& sp) {
  return channel_bits(s.channel, s.proto, sp, s.sensing.sampling_freq, s.si);
}

/// Expected wait, per access cycle that started with the PU idle, for the PU
/// to release the channel again before contention can restart. The on/off
/// chain is active at the end of the cycle with probability
/// P(H1) (1 - exp(-cycle (1/mean_idle + 1/mean_active))), and the residual
/// active period is exponential with mean mean_active.
inline double pu_deferral(const ChannelModel& ch, double cycle) {
  const double rate = 1.0 / ch.mean_idle + 1.0 / ch.mean_active;
  return ch.mean_active * ch.prob_busy() * -std::expm1(-cycle * rate);
}

/// Cycle-time denominator for a given data-phase length and contender count.
inline double cycle_time(const ChannelSetup& s, int n) {
  const double busy = contention::mean_contention(n, s.proto.p, s.timings).overhead + s.proto.frame;
  return s.model.pu_deferral ? busy + pu_deferral(s.channel, busy) : busy;
}

/// Throughput when the bits per data phase are already known.
inline double throughput_from_bits(const ChannelSetup& s, double bits, int n) {
  return bits / cycle_time(s, n);
}

/// Throughput of one channel with n contenders at the configured (T_S, P_sen).
inline double channel_throughput(const ChannelSetup& s, int n) {
  if (n < 1) throw std::invalid_argument("channel_throughput: n must be >= 1");
  const auto sp = sensing::solve_threshold(s);
  return throughput_from_bits(s, channel_bits(s, sp).total(), n);
}

// ---------------------------------------------------------------------------
// Partitions of N SUs over M channels.

struct Partition {
  std::vector<int> counts;
  double weight_log = 0.0; // log of N! / prod n_j!
};

using PartitionSet = std::vector<Partition>;

/// Number of compositions C(N+M-1, M-1), as a double.
inline double partition_count(int n_sus, int m) {
  return std::exp(std::lgamma(n_sus + m) - std::lgamma(n_sus + 1) - std::lgamma(m));
}

inline double multinomial_log(const std::vector<int>& counts) {
  int total = 0;
  double log_w = 0.0;
  for (int c : counts) {
    total += c;
    log_w -= std::lgamma(c + 1.0);
  }
  return log_w + std::lgamma(total + 1.0);
}

/// All compositions, ordered with the first channel's count descending.
inline PartitionSet enumerate_partitions(int n_sus, int m) {
  if (n_sus < 1 || m < 1) throw std::invalid_argument("enumerate_partitions: N and M must be >= 1");
  const double count = partition_count(n_sus, m);
  if (count > kMaxPartitions * (1 + 1e-9))
    throw CapacityError("enumerate_partitions: " + std::to_string(count) +
                        " partitions exceed the limit of 1e7");
  PartitionSet out;
  out.reserve(static_cast<std::size_t>(std::llround(count)));
  std::vector<int> cur(static_cast<std::size_t>(m), 0);
  // Depth-first over channels: channel j takes k of the remaining users.
  auto rec = [&](auto&& self, int j, int remaining) -> void {
    if (j == m - 1) {
      cur[static_cast<std::size_t>(j)] = remaining;
      out.push_back(Partition{cur, multinomial_log(cur)});
      return;
    }
    for (int k = remaining; k >= 0; --k) {
      cur[static_cast<std::size_t>(j)] = k;
      self(self, j + 1, remaining - k);
    }
  };
  rec(rec, 0, n_sus);
  return out;
}

/// n * log(p) with the 0 * log(0) = 0 convention.
inline double log_pow(double p, int n) {
  if (n == 0) return 0.0;
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  return n * std::log(p);
}

/// Probability of a partition under independent selection with probabilities probs.
inline double partition_probability(const Partition& w, const std::vector<double>& probs) {
  double lp = w.weight_log;
  for (std::size_t j = 0; j < probs.size(); ++j) lp += log_pow(probs[j], w.counts[j]);
  return std::exp(lp);
}

/// NT_j(n) for j in [0, M) and n in [1, N]; unset entries are NaN.
class RateTable {
 public:
  RateTable(int m, int n_sus)
      : m_(m), n_(n_sus),
        v_(static_cast<std::size_t>(m) * static_cast<std::size_t>(n_sus + 1),
           std::numeric_limits<double>::quiet_NaN()) {}

  int channels() const { return m_; }
  int users() const { return n_; }

  void set(int j, int n, double value) { v_.at(index(j, n)) = value; }

  double at(int j, int n) const {
    const double v = v_.at(index(j, n));
    if (std::isnan(v))
      throw std::out_of_range("rate table: missing entry for channel " + std::to_string(j) +
                              " with " + std::to_string(n) + " users");
    return v;
  }

 private:
  std::size_t index(int j, int n) const {
    if (j < 0 || j >= m_ || n < 1 || n > n_)
      throw std::out_of_range("rate table: index (" + std::to_string(j) + ", " +
                              std::to_string(n) + ") outside table");
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(n_ + 1) +
           static_cast<std::size_t>(n);
  }

  int m_;
  int n_;
  std::vector<double> v_;
};

/// Sum over occupied channels of NT_j(n_j) for one partition.
inline double partition_rate(const Partition& w, const RateTable& table) {
  double sum = 0.0;
  for (std::size_t j = 0; j < w.counts.size(); ++j)
    if (w.counts[j] > 0) sum += table.at(static_cast<int>(j), w.counts[j]);
  return sum;
}

inline double network_throughput(const PartitionSet& omega, const std::vector<double>& probs,
                                 const RateTable& table) {
  double nt = 0.0;
  for (const auto& w : omega) {
    const double mass = partition_probability(w, probs);
    if (mass > 0.0) nt += mass * partition_rate(w, table);
  }
  return nt;
}

/// Expected NT_j(n_j) of every channel; the entries sum to the network throughput.
inline std::vector<double> channel_contributions(const PartitionSet& omega,
                                                 const std::vector<double>& probs,
                                                 const RateTable& table) {
  std::vector<double> out(probs.size(), 0.0);
  for (const auto& w : omega) {
    const double mass = partition_probability(w, probs);
    if (mass <= 0.0) continue;
    for (std::size_t j = 0; j < w.counts.size(); ++j)
      if (w.counts[j] > 0) out[j] += mass * table.at(static_cast<int>(j), w.counts[j]);
  }
  return out;
}

inline double network_throughput(const Scenario& s, const RateTable& table) {
  if (table.channels() != s.num_channels() || table.users() != s.num_sus)
    throw std::invalid_argument("network_throughput: table shape does not match scenario");
  return network_throughput(enumerate_partitions(s.num_sus, s.num_channels()), s.selection_probs,
                            table);
}

/// NT_j(n) for every channel and n at the scenario's own sensing configuration.
inline RateTable rate_table(const Scenario& s) {
  RateTable table(s.num_channels(), s.num_sus);
  for (int j = 0; j < s.num_channels(); ++j) {
    const auto setup = channel_setup(s, j);
    const double bits = channel_bits(setup, sensing::solve_threshold(setup)).total();
    for (int n = 1; n <= s.num_sus; ++n) table.set(j, n, throughput_from_bits(setup, bits, n));
  }
  return table;
}

/// Analytical network throughput of a fully specified scenario.
inline double evaluate(const Scenario& s) { return network_throughput(s, rate_table(s)); }

} // namespace mfdc::throughput
