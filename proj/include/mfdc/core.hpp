#pragma once

// Domain types shared by every part of the library.
//
// Units: durations are seconds and powers are linear with the noise power
// fixed to one. Decibels and milliseconds only appear in scenario files.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfdc {

/// Noise power. Every linear power in the library is relative to it.
inline constexpr double kNoisePower = 1.0;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Scenario or argument violates a documented invariant.
struct ValidationError : Error {
  explicit ValidationError(std::vector<std::string> issues)
      : Error(join(issues)), issues(std::move(issues)) {}
  std::vector<std::string> issues;

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid scenario:";
    for (const auto& s : v) out += "\n  " + s;
    return out;
  }
};

/// Quadrature, root bracketing or an iterative solver failed.
struct NumericalError : Error {
  using Error::Error;
};

/// A combinatorial structure would be too large to materialize.
struct CapacityError : Error {
  using Error::Error;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

/// Primary-user on/off statistics of one channel.
struct ChannelModel {
  double mean_idle = 1.0;    // s
  double mean_active = 0.05; // s
  double pu_power = 0.01;    // received PU power, linear

  double prob_idle() const { return mean_idle / (mean_idle + mean_active); }
  double prob_busy() const { return mean_active / (mean_idle + mean_active); }
};

/// 802.11 DCF style timing constants, all in seconds.
struct MacTimings {
  double slot = 20e-6;
  double difs = 50e-6;
  double sifs = 10e-6;
  double rts = 288e-6;
  double cts = 240e-6;
  double ack = 240e-6;
  double prop_delay = 1e-6;

  double t_succ() const { return difs + rts + sifs + cts + 2.0 * prop_delay; }
  double t_coll() const { return difs + rts + prop_delay; }
  /// Fixed part of one reservation overhead beyond the contention phase.
  double tail() const { return 2.0 * sifs + 2.0 * prop_delay + ack; }
};

/// Residual self-interference I = zeta * P^xi.
struct SelfInterference {
  double zeta = 0.2;
  double xi = 0.95;
};

struct SensingParams {
  double sampling_freq = 6e6;    // Hz
  double target_detection = 0.8; // required average detection probability
};

struct ProtocolConfig {
  double p = 0.0022;                     // per-slot attempt probability
  double frame = 10e-3;                  // data phase T (s)
  double sensing_time = 3e-3;            // FD sensing stage T_S (s)
  double sensing_power = db_to_linear(5.689);
  double data_power = db_to_linear(15.0);
  double max_power = db_to_linear(15.0);
  double evacuation = 20e-3;             // s
};

/// Modelling switches of the analytical throughput expression.
struct ModelOptions {
  /// Charge each access cycle the expected wait for the PU to release the
  /// channel when it returned during the cycle. Disabling it gives the bare
  /// B / (T_ove + T) ratio.
  bool pu_deferral = true;
};

struct Scenario {
  int num_sus = 1;
  std::vector<ChannelModel> channels{ChannelModel{}};
  std::vector<double> selection_probs{1.0};
  int reselect_period = 100; // frames between channel re-draws (simulator)
  MacTimings timings;
  SelfInterference si;
  SensingParams sensing;
  ProtocolConfig proto;
  ModelOptions model;

  int num_channels() const { return static_cast<int>(channels.size()); }
};

/// Returns every violated invariant as "field.path: message". Empty means valid.
inline std::vector<std::string> check(const Scenario& s) {
  std::vector<std::string> issues;
  auto fail = [&](std::string msg) { issues.push_back(std::move(msg)); };
  auto finite = [](double x) { return std::isfinite(x); };

  if (s.num_sus < 1) fail("num_sus: must be >= 1");
  if (s.channels.empty()) fail("channels: at least one channel required");
  for (std::size_t j = 0; j < s.channels.size(); ++j) {
    const auto& c = s.channels[j];
    const std::string path = "channels[" + std::to_string(j) + "]";
    if (!(c.mean_idle > 0) || !finite(c.mean_idle)) fail(path + ".mean_idle: must be > 0");
    if (!(c.mean_active > 0) || !finite(c.mean_active)) fail(path + ".mean_active: must be > 0");
    if (!(c.pu_power >= 0) || !finite(c.pu_power)) fail(path + ".pu_power: must be >= 0");
  }

  if (s.selection_probs.size() != s.channels.size()) {
    fail("selection_probs: length " + std::to_string(s.selection_probs.size()) +
         " != number of channels " + std::to_string(s.channels.size()));
  } else {
    bool in_range = true;
    for (std::size_t j = 0; j < s.selection_probs.size(); ++j) {
      const double q = s.selection_probs[j];
      if (!(q >= 0.0 && q <= 1.0)) {
        fail("selection_probs[" + std::to_string(j) + "]: must lie in [0,1]");
        in_range = false;
      }
    }
    const double sum = std::accumulate(s.selection_probs.begin(), s.selection_probs.end(), 0.0);
    if (in_range && std::abs(sum - 1.0) > 1e-12)
      fail("selection_probs: sum != 1 (got " + std::to_string(sum) + ")");
  }
  if (s.reselect_period < 1) fail("reselect_period: must be >= 1");

  const auto& t = s.timings;
  const std::pair<const char*, double> durations[] = {
      {"slot", t.slot}, {"difs", t.difs}, {"sifs", t.sifs}, {"rts", t.rts},
      {"cts", t.cts},   {"ack", t.ack},   {"prop_delay", t.prop_delay}};
  for (const auto& [name, v] : durations)
    if (!(v > 0) || !finite(v)) fail(std::string("timings.") + name + ": must be > 0");
  if (t.prop_delay > 0 && t.slot > 0 && !(t.prop_delay < t.slot))
    fail("timings.prop_delay: must be smaller than timings.slot");

  if (!(s.si.zeta >= 0) || !finite(s.si.zeta)) fail("si.zeta: must be >= 0");
  if (!(s.si.xi >= 0 && s.si.xi <= 1)) fail("si.xi: must lie in [0,1]");

  if (!(s.sensing.sampling_freq > 0) || !finite(s.sensing.sampling_freq))
    fail("sensing.sampling_freq: must be > 0");
  if (!(s.sensing.target_detection > 0 && s.sensing.target_detection < 1))
    fail("sensing.target_detection: must lie in (0,1)");

  const auto& pc = s.proto;
  if (!(pc.p > 0 && pc.p < 1)) fail("proto.p: must lie in (0,1)");
  if (!(pc.frame > 0) || !finite(pc.frame)) fail("proto.frame: must be > 0");
  if (!(pc.sensing_time > 0)) fail("proto.sensing_time: must be > 0");
  else if (pc.sensing_time > pc.frame) fail("proto.sensing_time: T_S > T (must not exceed proto.frame)");
  if (!(pc.max_power >= 0) || !finite(pc.max_power)) fail("proto.max_power: must be >= 0");
  if (!(pc.sensing_power >= 0)) fail("proto.sensing_power: must be >= 0");
  else if (pc.sensing_power > pc.max_power * (1 + 1e-12))
    fail("proto.sensing_power: exceeds proto.max_power");
  if (!(pc.data_power >= 0) || !finite(pc.data_power)) fail("proto.data_power: must be >= 0");
  if (!(pc.frame < pc.evacuation)) fail("proto.frame: must be smaller than proto.evacuation");
  return issues;
}

/// Returns the scenario unchanged when valid, otherwise throws with the full issue list.
inline Scenario validate(Scenario s) {
  auto issues = check(s);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return s;
}

/// Everything the single-channel model needs, bundled for one channel.
struct ChannelSetup {
  ChannelModel channel;
  ProtocolConfig proto;
  MacTimings timings;
  SelfInterference si;
  SensingParams sensing;
  ModelOptions model;
};

inline ChannelSetup channel_setup(const Scenario& s, int j) {
  return ChannelSetup{s.channels.at(static_cast<std::size_t>(j)), s.proto, s.timings,
                      s.si, s.sensing, s.model};
}

} // namespace mfdc
