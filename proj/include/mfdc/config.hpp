#pragma once

// Scenario files: one `key = value` per line, `#` starts a comment.
// Durations are in milliseconds and powers in dB; everything is converted to
// seconds and linear power on load. See docs/scenario-schema.json.
//
//   num_sus = 10
//   channels[0].mean_idle_ms = 500
//   channels[0].mean_active_ms = 50
//   selection_probs[0] = 0.5
//   proto.p = 0.01
//   si.zeta = 0.2

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "mfdc/core.hpp"
#include "mfdc/optimizer.hpp"
#include "mfdc/simulator.hpp"

namespace mfdc::config {

struct RunConfig {
  Scenario scenario;
  sim::SimConfig sim;
  opt::Options opt;
};

struct ParseError : Error {
  using Error::Error;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParseError(key + ": expected a number, got '" + v + "'");
  }
}

inline std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ParseError(key + ": expected an integer, got '" + v + "'");
  return out;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ParseError(key + ": expected an unsigned integer, got '" + v + "'");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParseError(key + ": expected true/false, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

inline Setter ms(double ProtocolConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) {
    c.scenario.proto.*field = to_double(k, v) * 1e-3;
  };
}
inline Setter db(double ProtocolConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) {
    c.scenario.proto.*field = db_to_linear(to_double(k, v));
  };
}
inline Setter timing(double MacTimings::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) {
    c.scenario.timings.*field = to_double(k, v) * 1e-3;
  };
}
template <class T>
Setter option(T opt::Options::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) {
    if constexpr (std::is_floating_point_v<T>) c.opt.*field = to_double(k, v);
    else if constexpr (std::is_same_v<T, std::uint64_t>) c.opt.*field = to_u64(k, v);
    else c.opt.*field = static_cast<T>(to_int(k, v));
  };
}

inline const std::map<std::string, Setter>& scalar_keys() {
  static const std::map<std::string, Setter> keys = {
      {"num_sus", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scenario.num_sus = static_cast<int>(to_int(k, v));
       }},
      {"reselect_period", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scenario.reselect_period = static_cast<int>(to_int(k, v));
       }},
      {"timings.slot_ms", timing(&MacTimings::slot)},
      {"timings.difs_ms", timing(&MacTimings::difs)},
      {"timings.sifs_ms", timing(&MacTimings::sifs)},
      {"timings.rts_ms", timing(&MacTimings::rts)},
      {"timings.cts_ms", timing(&MacTimings::cts)},
      {"timings.ack_ms", timing(&MacTimings::ack)},
      {"timings.prop_delay_ms", timing(&MacTimings::prop_delay)},
      {"si.zeta", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scenario.si.zeta = to_double(k, v);
       }},
      {"si.xi", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scenario.si.xi = to_double(k, v);
       }},
      {"sensing.sampling_freq_hz", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scenario.sensing.sampling_freq = to_double(k, v);
       }},
      {"sensing.target_detection", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scenario.sensing.target_detection = to_double(k, v);
       }},
      {"proto.p", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scenario.proto.p = to_double(k, v);
       }},
      {"proto.frame_ms", ms(&ProtocolConfig::frame)},
      {"proto.sensing_time_ms", ms(&ProtocolConfig::sensing_time)},
      {"proto.evacuation_ms", ms(&ProtocolConfig::evacuation)},
      {"proto.sensing_power_db", db(&ProtocolConfig::sensing_power)},
      {"proto.data_power_db", db(&ProtocolConfig::data_power)},
      {"proto.max_power_db", db(&ProtocolConfig::max_power)},
      {"model.pu_deferral", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scenario.model.pu_deferral = to_bool(k, v);
       }},
      {"sim.horizon_ms", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.sim.horizon = to_double(k, v) * 1e-3;
       }},
      {"sim.warmup_ms", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.sim.warmup = to_double(k, v) * 1e-3;
       }},
      {"sim.batches", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.sim.batches = static_cast<int>(to_int(k, v));
       }},
      {"sim.seed", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.sim.seed = to_u64(k, v);
       }},
      {"sim.perfect_sensing", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.sim.perfect_sensing = to_bool(k, v);
       }},
      {"sim.single_transition", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.sim.single_transition = to_bool(k, v);
       }},
      {"opt.ts_grid", option(&opt::Options::ts_grid)},
      {"opt.psen_grid", option(&opt::Options::psen_grid)},
      {"opt.golden_iters", option(&opt::Options::golden_iters)},
      {"opt.ts_tol", option(&opt::Options::ts_tol)},
      {"opt.psen_tol", option(&opt::Options::psen_tol)},
      {"opt.restarts", option(&opt::Options::restarts)},
      {"opt.pg_max_steps", option(&opt::Options::pg_max_steps)},
      {"opt.pg_tol", option(&opt::Options::pg_tol)},
      {"opt.armijo_c", option(&opt::Options::armijo_c)},
      {"opt.armijo_factor", option(&opt::Options::armijo_factor)},
      {"opt.seed", option(&opt::Options::seed)},
      {"opt.threads", option(&opt::Options::threads)},
  };
  return keys;
}

template <class T>
T& grow(std::vector<T>& v, std::size_t index) {
  if (index >= 4096) throw ParseError("index " + std::to_string(index) + " is too large");
  if (v.size() <= index) v.resize(index + 1);
  return v[index];
}

} // namespace detail

/// Applies one key. Indexed keys grow the channel list as needed.
inline void set(RunConfig& c, const std::string& key, const std::string& raw) {
  const std::string value = detail::trim(raw);
  if (auto it = detail::scalar_keys().find(key); it != detail::scalar_keys().end()) {
    it->second(c, key, value);
    return;
  }
  static const std::regex channel_key(R"(channels\[(\d+)\]\.(mean_idle_ms|mean_active_ms|pu_power_db))");
  static const std::regex prob_key(R"(selection_probs\[(\d+)\])");
  std::smatch m;
  if (std::regex_match(key, m, channel_key)) {
    auto& ch = detail::grow(c.scenario.channels, std::stoul(m[1].str()));
    const double x = detail::to_double(key, value);
    if (m[2] == "mean_idle_ms") ch.mean_idle = x * 1e-3;
    else if (m[2] == "mean_active_ms") ch.mean_active = x * 1e-3;
    else ch.pu_power = db_to_linear(x);
    return;
  }
  if (std::regex_match(key, m, prob_key)) {
    detail::grow(c.scenario.selection_probs, std::stoul(m[1].str())) = detail::to_double(key, value);
    return;
  }
  throw ParseError("unknown key '" + key + "'");
}

/// Parses a scenario file body. Missing selection probabilities default to uniform.
inline RunConfig parse(std::istream& in) {
  RunConfig c;
  c.scenario.channels.clear();
  c.scenario.selection_probs.clear();
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("line " + std::to_string(number) + ": expected 'key = value'");
    try {
      set(c, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(number) + ": " + e.what());
    }
  }
  if (c.scenario.channels.empty()) c.scenario.channels.push_back(ChannelModel{});
  if (c.scenario.selection_probs.empty())
    c.scenario.selection_probs.assign(c.scenario.channels.size(),
                                      1.0 / static_cast<double>(c.scenario.channels.size()));
  return c;
}

inline RunConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open scenario file '" + path + "'");
  return parse(in);
}

} // namespace mfdc::config
