#pragma once

// Monte Carlo simulation of the multi-channel FD cognitive MAC protocol.
//
// Time is continuous. Every channel carries an independent PU on/off renewal
// process. SUs re-draw their channel at the start of every epoch of
// reselect_period frames; within an epoch each channel runs p-persistent
// contention, RTS/CTS reservation and the two-stage data phase. Sensing
// decisions are Bernoulli draws with the energy-detector probabilities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfdc/contention.hpp"
#include "mfdc/core.hpp"
#include "mfdc/random.hpp"
#include "mfdc/sensing.hpp"
#include "mfdc/stats.hpp"
#include "mfdc/throughput.hpp"

namespace mfdc::sim {

inline constexpr double kNever = std::numeric_limits<double>::infinity();

struct SimConfig {
  double horizon = 200.0; // s of simulated time, warmup included
  double warmup = 5.0;    // s
  int batches = 20;
  std::uint64_t seed = 1;
  /// Force P_f = 0 and P_d = 1.
  bool perfect_sensing = false;
  /// Once the PU turns on inside a data phase it is treated as on until the
  /// frame ends, matching the at-most-one-transition analysis.
  bool single_transition = false;
  /// Line-delimited JSON event trace; disabled when null.
  std::ostream* trace = nullptr;
};

inline std::vector<std::string> check(const SimConfig& c) {
  std::vector<std::string> issues;
  if (!(c.horizon > 0) || !std::isfinite(c.horizon)) issues.emplace_back("sim.horizon: must be > 0");
  if (!(c.warmup >= 0)) issues.emplace_back("sim.warmup: must be >= 0");
  if (!(c.horizon > c.warmup)) issues.emplace_back("sim.horizon: must exceed sim.warmup");
  if (c.batches < 2) issues.emplace_back("sim.batches: must be >= 2");
  return issues;
}

struct Counters {
  std::uint64_t epochs = 0;
  std::uint64_t contention_cycles = 0;   // successful reservations
  std::uint64_t contention_rounds = 0;   // idle run followed by a busy slot
  std::uint64_t collisions = 0;
  std::uint64_t idle_slots = 0;
  std::uint64_t aborted_contentions = 0; // PU returned during contention
  std::uint64_t data_phases = 0;
  std::uint64_t false_alarms = 0;
  std::uint64_t detections = 0;
  std::uint64_t missed_detections = 0;
  double pu_overlap_time = 0.0;          // SU transmitting while the PU is on
  double max_frame_overlap = 0.0;
  std::vector<std::uint64_t> selections; // SU-epochs spent on each channel
};

struct SimulationResult {
  double throughput = 0.0;
  double ci_halfwidth = 0.0; // 95 % batch means
  std::vector<double> batch_throughput;
  double bits_per_phase = 0.0; // mean over data phases completed inside an epoch
  double bits_per_phase_se = 0.0;
  Counters counters;
};

/// Lazily generated alternating idle/active periods of one PU.
class PuProcess {
 public:
  struct Span {
    double start;
    double end;
    bool active;
  };

  PuProcess(const ChannelModel& ch, Rng rng, std::ostream* trace = nullptr, int channel = 0)
      : ch_(ch), rng_(std::move(rng)), trace_(trace), channel_(channel) {
    // Stationary start; the residual of an exponential period is exponential.
    const bool active = !rng_.bernoulli(ch_.prob_idle());
    spans_.push_back({0.0, draw(active), active});
  }

  bool active_at(double t) { return locate(t).active; }

  /// Earliest time >= t at which the PU is idle.
  double idle_from(double t) {
    const Span& s = locate(t);
    return s.active ? s.end : t;
  }

  /// First instant in [a, b) at which the PU is active, or kNever.
  double first_active_in(double a, double b) {
    ensure(b);
    for (const auto& s : spans_) {
      if (s.end <= a) continue;
      if (s.start >= b) break;
      if (s.active) return std::max(a, s.start);
    }
    return kNever;
  }

  /// Time the PU spends active inside [a, b).
  double active_time(double a, double b) {
    if (b <= a) return 0.0;
    ensure(b);
    double total = 0.0;
    for (const auto& s : spans_) {
      if (s.end <= a) continue;
      if (s.start >= b) break;
      if (s.active) total += std::min(b, s.end) - std::max(a, s.start);
    }
    return total;
  }

  /// Drops periods that ended before t.
  void forget_before(double t) {
    while (spans_.size() > 1 && spans_.front().end <= t) spans_.pop_front();
  }

  /// Generates periods until t is covered; exposes them for inspection.
  const std::deque<Span>& spans_until(double t) {
    ensure(t);
    return spans_;
  }

 private:
  double draw(bool active) { return rng_.exponential(active ? ch_.mean_active : ch_.mean_idle); }

  void ensure(double t) {
    while (spans_.back().end <= t) {
      const Span last = spans_.back();
      const bool next = !last.active;
      spans_.push_back({last.end, last.end + draw(next), next});
      if (trace_) {
        *trace_ << nlohmann::json{{"time", last.end}, {"channel", channel_},
                                  {"event", next ? "pu_on" : "pu_off"}, {"su", -1}}
                       .dump()
                << '\n';
      }
    }
  }

  const Span& locate(double t) {
    ensure(t);
    for (const auto& s : spans_)
      if (t < s.end && t >= s.start) return s;
    return spans_.back();
  }

  ChannelModel ch_;
  Rng rng_;
  std::ostream* trace_;
  int channel_;
  std::deque<Span> spans_;
};

/// One contention round: every contender waits a geometric number of idle
/// slots; the earliest attempt slot is busy and succeeds only if it is unique.
struct Round {
  long idle_slots = 0;
  bool success = false;
  int winner = -1;
};

template <class RngRef>
Round contention_round(std::vector<RngRef>& contenders, double p) {
  Round r;
  r.idle_slots = std::numeric_limits<long>::max();
  int attempts = 0;
  for (std::size_t i = 0; i < contenders.size(); ++i) {
    const long k = static_cast<Rng&>(contenders[i]).geometric(p);
    if (k < r.idle_slots) {
      r.idle_slots = k;
      attempts = 1;
      r.winner = static_cast<int>(i);
    } else if (k == r.idle_slots) {
      ++attempts;
    }
  }
  r.success = attempts == 1;
  return r;
}

struct ContentionSample {
  stats::Accumulator idle_run;    // idle slots per idle period
  stats::Accumulator collisions;  // collisions per reservation
  stats::Accumulator contention;  // seconds per reservation
  std::uint64_t idle_slots = 0;
  std::uint64_t success_slots = 0;
  std::uint64_t collision_slots = 0;
};

/// Bare contention cycles: no PU and no data phase.
inline ContentionSample simulate_contention_only(int n, double p, const MacTimings& t,
                                                 std::uint64_t cycles, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("simulate_contention_only: n must be >= 1");
  if (!(p > 0 && p < 1)) throw std::invalid_argument("simulate_contention_only: p must lie in (0,1)");
  if (cycles < 1) throw std::invalid_argument("simulate_contention_only: cycles must be >= 1");
  const Rng master(seed);
  std::vector<Rng> sus;
  for (int i = 0; i < n; ++i) sus.push_back(master.split(3, static_cast<std::uint64_t>(i)));

  ContentionSample out;
  for (std::uint64_t c = 0; c < cycles; ++c) {
    double elapsed = 0.0;
    long collisions = 0;
    for (;;) {
      const Round r = contention_round(sus, p);
      out.idle_run.add(static_cast<double>(r.idle_slots));
      out.idle_slots += static_cast<std::uint64_t>(r.idle_slots);
      elapsed += static_cast<double>(r.idle_slots) * t.slot;
      if (r.success) {
        ++out.success_slots;
        elapsed += t.t_succ();
        break;
      }
      ++out.collision_slots;
      ++collisions;
      elapsed += t.t_coll();
    }
    out.collisions.add(static_cast<double>(collisions));
    out.contention.add(elapsed);
  }
  return out;
}

namespace detail {

class Trace {
 public:
  explicit Trace(std::ostream* os) : os_(os) {}
  void operator()(double time, int channel, const char* event, int su) const {
    if (!os_) return;
    *os_ << nlohmann::json{{"time", time}, {"channel", channel}, {"event", event}, {"su", su}}.dump()
         << '\n';
  }

 private:
  std::ostream* os_;
};

struct ChannelState {
  ChannelSetup setup;
  sensing::SensingPoint point;
  throughput::Rates rates;
  PuProcess pu;
  Rng sensing_rng;
};

struct EpochStats {
  Counters* counters;
  stats::Accumulator* phase_bits;
};

/// Runs one channel over [e0, e1) with the given SUs; returns the bits/Hz delivered.
inline double run_channel_epoch(ChannelState& ch, int j, const std::vector<int>& sus,
                                std::vector<Rng>& su_rng, double e0, double e1,
                                const SimConfig& cfg, EpochStats out, const Trace& trace) {
  if (sus.empty()) return 0.0;
  const auto& tm = ch.setup.timings;
  const double p = ch.setup.proto.p;
  const double T = ch.setup.proto.frame;
  const double Ts = ch.point.sensing_time;
  auto& c = *out.counters;

  std::vector<std::reference_wrapper<Rng>> contenders;
  for (int i : sus) contenders.emplace_back(su_rng[static_cast<std::size_t>(i)]);

  double bits = 0.0;
  double t = e0;
  while (t < e1) {
    t = ch.pu.idle_from(t);
    if (t >= e1) break;

    // Contention until a reservation succeeds or the PU interrupts.
    bool reserved = false;
    int winner = -1;
    while (t < e1) {
      const Round r = contention_round(contenders, p);
      const double end = t + static_cast<double>(r.idle_slots) * tm.slot +
                         (r.success ? tm.t_succ() : tm.t_coll());
      const double pu_on = ch.pu.first_active_in(t, end);
      if (pu_on < end) {
        ++c.aborted_contentions;
        t = pu_on;
        break;
      }
      ++c.contention_rounds;
      c.idle_slots += static_cast<std::uint64_t>(r.idle_slots);
      t = end;
      if (r.success) {
        reserved = true;
        winner = sus[static_cast<std::size_t>(r.winner)];
        break;
      }
      ++c.collisions;
      trace(t, j, "collision", -1);
    }
    if (!reserved || t >= e1) continue;
    ++c.contention_cycles;
    trace(t, j, "reserved", winner);

    // Two-stage data phase.
    const double td = t + tm.sifs + tm.prop_delay;
    const double sense_end = td + Ts;
    const double frame_end = td + T;
    ++c.data_phases;
    trace(td, j, "data_start", winner);

    const double arrival = ch.pu.first_active_in(td, frame_end);
    bool vacate = false;
    if (arrival >= sense_end) {
      vacate = !cfg.perfect_sensing && ch.sensing_rng.bernoulli(ch.point.false_alarm);
      if (vacate) ++c.false_alarms;
    } else {
      const double pd =
          cfg.perfect_sensing
              ? 1.0
              : sensing::detection_h01(arrival - td, ch.point.threshold, Ts, ch.point.sensing_power,
                                       ch.setup.sensing.sampling_freq, ch.setup.channel.pu_power,
                                       ch.setup.si);
      vacate = ch.sensing_rng.bernoulli(pd);
      if (vacate) ++c.detections;
      else ++c.missed_detections;
    }
    if (vacate) trace(sense_end, j, "vacate", winner);

    auto pu_time = [&](double a, double b) {
      if (b <= a) return 0.0;
      if (!cfg.single_transition) return ch.pu.active_time(a, b);
      return arrival < b ? b - std::max(a, arrival) : 0.0;
    };
    const double s_end = std::min(sense_end, e1);
    const double s_on = pu_time(td, s_end);
    double phase = (std::max(0.0, s_end - td) - s_on) * ch.rates.sensing + s_on * ch.rates.sensing_pu;
    double overlap = ch.pu.active_time(td, s_end);
    if (!vacate) {
      const double x_end = std::min(frame_end, e1);
      const double x_on = pu_time(sense_end, x_end);
      phase += (std::max(0.0, x_end - sense_end) - x_on) * ch.rates.data + x_on * ch.rates.data_pu;
      overlap += ch.pu.active_time(sense_end, x_end);
    }
    bits += phase;
    c.pu_overlap_time += overlap;
    c.max_frame_overlap = std::max(c.max_frame_overlap, overlap);
    if (frame_end <= e1) out.phase_bits->add(phase);

    t = frame_end + tm.sifs + tm.ack + tm.prop_delay;
    trace(t, j, "cycle_end", winner);
  }
  return bits;
}

} // namespace detail

inline SimulationResult simulate(const Scenario& scenario, const SimConfig& cfg) {
  const Scenario s = validate(scenario);
  if (auto issues = check(cfg); !issues.empty()) throw ValidationError(std::move(issues));

  const double epoch = s.reselect_period * s.proto.frame;
  const auto warm_epochs = static_cast<long>(std::ceil(cfg.warmup / epoch - 1e-9));
  const auto per_batch =
      static_cast<long>(std::floor((cfg.horizon - warm_epochs * epoch) / epoch / cfg.batches + 1e-9));
  if (per_batch < 1)
    throw ValidationError({"sim.horizon: too short for " + std::to_string(cfg.batches) +
                           " batches of at least one re-selection epoch (" +
                           std::to_string(epoch) + " s)"});

  const detail::Trace trace(cfg.trace);
  const Rng master(cfg.seed);
  const int m = s.num_channels();
  std::vector<detail::ChannelState> channels;
  channels.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    const auto setup = channel_setup(s, j);
    const auto point = sensing::solve_threshold(setup);
    const auto uj = static_cast<std::uint64_t>(j);
    channels.push_back(detail::ChannelState{
        setup, point,
        throughput::link_rates(point.sensing_power, setup.proto.data_power, setup.channel.pu_power),
        PuProcess(setup.channel, master.split(1, uj), cfg.trace, j), master.split(2, uj)});
  }
  std::vector<Rng> su_rng;
  for (int i = 0; i < s.num_sus; ++i) su_rng.push_back(master.split(3, static_cast<std::uint64_t>(i)));
  std::discrete_distribution<int> pick(s.selection_probs.begin(), s.selection_probs.end());

  SimulationResult result;
  Counters& kept = result.counters;
  kept.selections.assign(static_cast<std::size_t>(m), 0);
  Counters discarded = kept;
  stats::Accumulator phase_bits;
  stats::Accumulator discarded_bits;
  std::vector<double> batch_bits(static_cast<std::size_t>(cfg.batches), 0.0);

  const long total_epochs = warm_epochs + per_batch * cfg.batches;
  std::vector<std::vector<int>> groups(static_cast<std::size_t>(m));
  for (long e = 0; e < total_epochs; ++e) {
    const bool measured = e >= warm_epochs;
    Counters& c = measured ? kept : discarded;
    detail::EpochStats sink{&c, measured ? &phase_bits : &discarded_bits};
    const double e0 = static_cast<double>(e) * epoch;
    const double e1 = e0 + epoch;

    for (auto& g : groups) g.clear();
    for (int i = 0; i < s.num_sus; ++i) {
      const int j = pick(su_rng[static_cast<std::size_t>(i)]);
      groups[static_cast<std::size_t>(j)].push_back(i);
      ++c.selections[static_cast<std::size_t>(j)];
      trace(e0, j, "select", i);
    }
    ++c.epochs;

    double bits = 0.0;
    for (int j = 0; j < m; ++j) {
      auto& ch = channels[static_cast<std::size_t>(j)];
      bits += detail::run_channel_epoch(ch, j, groups[static_cast<std::size_t>(j)], su_rng, e0, e1,
                                        cfg, sink, trace);
      ch.pu.forget_before(e1);
    }
    if (measured) batch_bits[static_cast<std::size_t>((e - warm_epochs) / per_batch)] += bits;
  }

  const double batch_time = static_cast<double>(per_batch) * epoch;
  for (double b : batch_bits) result.batch_throughput.push_back(b / batch_time);
  const auto ci = stats::batch_means(result.batch_throughput, 0.95);
  result.throughput = ci.mean;
  result.ci_halfwidth = ci.half_width;
  result.bits_per_phase = phase_bits.mean();
  result.bits_per_phase_se = phase_bits.std_error();
  return result;
}

} // namespace mfdc::sim
