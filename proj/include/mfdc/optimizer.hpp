#pragma once

// Two-step protocol configuration.
//   1. Per channel and contender count: sensing time and sensing power that
//      maximize the channel throughput under the detection constraint.
//   2. Channel-selection probabilities maximizing the network throughput
//      polynomial over the probability simplex.
// Plus the equal-probability and fixed-assignment baselines.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "mfdc/core.hpp"
#include "mfdc/parallel.hpp"
#include "mfdc/sensing.hpp"
#include "mfdc/throughput.hpp"

namespace mfdc::opt {

struct Options {
  int ts_grid = 64;          // coarse grid over (0, T]
  int psen_grid = 32;        // coarse grid over [0, P_max]
  int golden_iters = 200;
  double ts_tol = 1e-6;      // relative to the frame length
  double psen_tol = 1e-6;    // relative to P_max
  int restarts = 20;
  int pg_max_steps = 5000;
  double pg_tol = 1e-8;      // tangent-space gradient norm
  double armijo_c = 1e-4;
  double armijo_factor = 0.5;
  std::uint64_t seed = 1;
  unsigned threads = 0;      // 0 = hardware concurrency
};

// ---------------------------------------------------------------------------
// One-dimensional search.

struct Point1D {
  double x;
  double f;
};

/// Golden-section maximization on [a, b]; stops once the bracket is below tol.
template <class F>
Point1D golden_max(const F& f, double a, double b, double tol, int max_iter) {
  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int i = 0; i < max_iter && (b - a) > tol; ++i) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? Point1D{c, fc} : Point1D{d, fd};
}

/// Evaluates `grid` and refines around the best node by golden section
/// between its neighbours. [lo, hi] is the feasible range.
template <class F>
Point1D grid_golden_max(const F& f, const std::vector<double>& grid, double lo, double hi,
                        double tol, int max_iter) {
  std::size_t best = 0;
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    values[i] = f(grid[i]);
    if (values[i] > values[best]) best = i;
  }
  const double a = best == 0 ? lo : grid[best - 1];
  const double b = best + 1 == grid.size() ? hi : grid[best + 1];
  Point1D refined = golden_max(f, a, b, tol, max_iter);
  // Golden section never evaluates the bracket ends; domain bounds that are
  // not grid nodes get one explicit look.
  for (double edge : {a, b}) {
    if (edge == grid.front() || edge == grid.back() || (edge != lo && edge != hi)) continue;
    const double fe = f(edge);
    if (fe > refined.f) refined = {edge, fe};
  }
  if (values[best] >= refined.f) return {grid[best], values[best]};
  return refined;
}

// ---------------------------------------------------------------------------
// Step 1: per-channel sensing configuration.

struct SensingTimeOptimum {
  double t_s = 0.0;
  double nt = 0.0;
};

struct ChannelOptimum {
  int n = 0;
  double t_s_opt = 0.0;
  double p_sen_opt = 0.0;
  double nt_opt = 0.0;
  double bits = 0.0;       // B_j at the optimum
  double threshold = 0.0;
  double false_alarm = 0.0;
};

/// Smallest sensing time searched; below it the detection target cannot be
/// met with a positive threshold.
inline double min_sensing_time(const ChannelSetup& s, const Options& o) {
  return s.proto.frame / (o.ts_grid * 64.0);
}

/// Data-phase bits at (T_S, P_sen) with the threshold solved for the target.
inline double bits_at(ChannelSetup s, double t_s, double p_sen) {
  s.proto.sensing_time = t_s;
  s.proto.sensing_power = p_sen;
  return throughput::channel_bits(s, sensing::solve_threshold(s)).total();
}

inline SensingTimeOptimum optimize_sensing_time(const ChannelSetup& s, int n,
                                                const Options& o = {}) {
  if (n < 1) throw std::invalid_argument("optimize_sensing_time: n must be >= 1");
  const double T = s.proto.frame;
  const double p_sen = s.proto.sensing_power;
  auto nt = [&](double t_s) {
    return throughput::throughput_from_bits(s, bits_at(s, t_s, p_sen), n);
  };
  std::vector<double> grid(static_cast<std::size_t>(o.ts_grid));
  for (int k = 1; k <= o.ts_grid; ++k) grid[static_cast<std::size_t>(k - 1)] = T * k / o.ts_grid;
  const auto best = grid_golden_max(nt, grid, min_sensing_time(s, o), T, o.ts_tol * T,
                                    o.golden_iters);
  return {best.x, best.f};
}

inline ChannelOptimum optimize_channel(const ChannelSetup& s, int n, const Options& o = {}) {
  if (n < 1) throw std::invalid_argument("optimize_channel: n must be >= 1");
  const double p_max = s.proto.max_power;
  std::map<double, SensingTimeOptimum> inner;
  auto nt = [&](double p_sen) {
    ChannelSetup at = s;
    at.proto.sensing_power = p_sen;
    const auto r = optimize_sensing_time(at, n, o);
    inner[p_sen] = r;
    return r.nt;
  };
  Point1D best{0.0, 0.0};
  if (p_max > 0.0) {
    std::vector<double> grid(static_cast<std::size_t>(o.psen_grid));
    for (int k = 0; k < o.psen_grid; ++k)
      grid[static_cast<std::size_t>(k)] = p_max * k / (o.psen_grid - 1);
    best = grid_golden_max(nt, grid, 0.0, p_max, o.psen_tol * p_max, o.golden_iters);
  } else {
    best = {0.0, nt(0.0)};
  }

  ChannelOptimum out;
  out.n = n;
  out.p_sen_opt = best.x;
  out.t_s_opt = inner.at(best.x).t_s;
  ChannelSetup at = s;
  at.proto.sensing_time = out.t_s_opt;
  at.proto.sensing_power = out.p_sen_opt;
  const auto sp = sensing::solve_threshold(at);
  out.bits = throughput::channel_bits(at, sp).total();
  out.nt_opt = throughput::throughput_from_bits(at, out.bits, n);
  out.threshold = sp.threshold;
  out.false_alarm = sp.false_alarm;
  return out;
}

/// Re-expresses an optimum found for one contender count at another count.
/// The cycle time does not depend on (T_S, P_sen), so the maximizer is shared.
inline ChannelOptimum rescale_optimum(const ChannelSetup& s, ChannelOptimum o, int n) {
  o.n = n;
  o.nt_opt = throughput::throughput_from_bits(s, o.bits, n);
  return o;
}

/// Per-(channel, n) optimum table for a whole scenario. Channels with identical
/// statistics share one optimization.
struct ChannelTable {
  std::vector<std::vector<ChannelOptimum>> optima; // [j][n-1]
  throughput::RateTable rates{1, 1};
};

inline ChannelTable optimize_channels(const Scenario& s, const Options& o = {}) {
  using Key = std::tuple<double, double, double>;
  std::map<Key, std::size_t> distinct;
  std::vector<int> representative;
  std::vector<std::size_t> slot(static_cast<std::size_t>(s.num_channels()));
  for (int j = 0; j < s.num_channels(); ++j) {
    const auto& c = s.channels[static_cast<std::size_t>(j)];
    const Key key{c.mean_idle, c.mean_active, c.pu_power};
    auto [it, inserted] = distinct.try_emplace(key, representative.size());
    if (inserted) representative.push_back(j);
    slot[static_cast<std::size_t>(j)] = it->second;
  }
  const auto solved = parallel_map(
      representative.size(),
      [&](std::size_t i) { return optimize_channel(channel_setup(s, representative[i]), 1, o); },
      o.threads);

  ChannelTable t;
  t.rates = throughput::RateTable(s.num_channels(), s.num_sus);
  t.optima.resize(static_cast<std::size_t>(s.num_channels()));
  for (int j = 0; j < s.num_channels(); ++j) {
    const auto setup = channel_setup(s, j);
    for (int n = 1; n <= s.num_sus; ++n) {
      auto opt = rescale_optimum(setup, solved[slot[static_cast<std::size_t>(j)]], n);
      t.rates.set(j, n, opt.nt_opt);
      t.optima[static_cast<std::size_t>(j)].push_back(opt);
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Step 2: channel-selection probabilities.

/// B(w_k) = multinomial(w_k) * sum_j 1{n_kj > 0} NT_j*(n_kj).
inline std::vector<double> build_partition_values(const throughput::PartitionSet& omega,
                                                  const throughput::RateTable& optima) {
  std::vector<double> values;
  values.reserve(omega.size());
  for (const auto& w : omega)
    values.push_back(std::exp(w.weight_log) * throughput::partition_rate(w, optima));
  return values;
}

/// The network throughput polynomial sum_k B_k prod_j p_j^{n_kj}.
class SelectionObjective {
 public:
  SelectionObjective(const throughput::PartitionSet& omega, const std::vector<double>& values,
                     int m)
      : omega_(omega), m_(m) {
    if (values.size() != omega.size())
      throw std::invalid_argument("selection objective: one value per partition required");
    log_values_.reserve(values.size());
    for (double v : values) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw std::invalid_argument("selection objective: partition values must be finite and >= 0");
      log_values_.push_back(v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity());
    }
  }

  int dimension() const { return m_; }

  double value(const std::vector<double>& p) const {
    double f = 0.0;
    for (std::size_t k = 0; k < omega_.size(); ++k) {
      double lt = log_values_[k];
      for (int j = 0; j < m_; ++j)
        lt += throughput::log_pow(p[static_cast<std::size_t>(j)], omega_[k].counts[static_cast<std::size_t>(j)]);
      if (lt > -std::numeric_limits<double>::infinity()) f += std::exp(lt);
    }
    return f;
  }

  std::vector<double> gradient(const std::vector<double>& p) const {
    std::vector<double> g(static_cast<std::size_t>(m_), 0.0);
    for (std::size_t k = 0; k < omega_.size(); ++k) {
      const auto& c = omega_[k].counts;
      for (int j = 0; j < m_; ++j) {
        const int nj = c[static_cast<std::size_t>(j)];
        if (nj == 0) continue;
        double lt = log_values_[k] + std::log(static_cast<double>(nj)) +
                    throughput::log_pow(p[static_cast<std::size_t>(j)], nj - 1);
        for (int i = 0; i < m_; ++i)
          if (i != j) lt += throughput::log_pow(p[static_cast<std::size_t>(i)], c[static_cast<std::size_t>(i)]);
        if (lt > -std::numeric_limits<double>::infinity()) g[static_cast<std::size_t>(j)] += std::exp(lt);
      }
    }
    return g;
  }

 private:
  const throughput::PartitionSet& omega_;
  std::vector<double> log_values_;
  int m_;
};

/// Euclidean projection onto the probability simplex.
inline std::vector<double> project_to_simplex(const std::vector<double>& y) {
  std::vector<double> u = y;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cumulative += u[i];
    const double t = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  std::vector<double> x(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) x[i] = std::max(0.0, y[i] - theta);
  return x;
}

struct SelectionOptimum {
  std::vector<double> probs;
  double nt = 0.0;
  bool converged = true;
  double stationarity = 0.0; // tangent-space gradient norm at probs
  std::vector<double> partition_values;
};

namespace detail {

inline double stationarity(const SelectionObjective& f, const std::vector<double>& x) {
  const auto g = f.gradient(x);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + g[i];
  const auto px = project_to_simplex(y);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (px[i] - x[i]) * (px[i] - x[i]);
  return std::sqrt(s);
}

struct Ascent {
  std::vector<double> x;
  double f;
  double stationarity;
};

inline Ascent projected_ascent(const SelectionObjective& obj, std::vector<double> x,
                               const Options& o) {
  double fx = obj.value(x);
  double step = 1.0;
  for (int it = 0; it < o.pg_max_steps; ++it) {
    const auto g = obj.gradient(x);
    bool moved = false;
    for (int bt = 0; bt < 80; ++bt, step *= o.armijo_factor) {
      std::vector<double> y(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + step * g[i];
      auto xn = project_to_simplex(y);
      double ascent = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) ascent += g[i] * (xn[i] - x[i]);
      if (ascent <= 0.0) break; // already stationary at this resolution
      const double fn = obj.value(xn);
      if (fn >= fx + o.armijo_c * ascent) {
        moved = true;
        x = std::move(xn);
        fx = fn;
        break;
      }
    }
    if (!moved) break;
    step = std::min(step * 4.0, 1e12);
    if (stationarity(obj, x) <= o.pg_tol) break;
  }
  return {x, fx, stationarity(obj, x)};
}

} // namespace detail

/// Starting points: the uniform point, one point leaning towards each vertex,
/// and Dirichlet(1) draws for the rest.
inline std::vector<std::vector<double>> restart_points(int m, const Options& o) {
  const auto mm = static_cast<std::size_t>(m);
  std::vector<std::vector<double>> starts;
  starts.emplace_back(mm, 1.0 / m);
  if (m == 1) return starts;
  for (int v = 0; v < m && static_cast<int>(starts.size()) < o.restarts; ++v) {
    std::vector<double> x(mm, 0.5 / (m - 1));
    x[static_cast<std::size_t>(v)] = 0.5;
    starts.push_back(std::move(x));
  }
  std::mt19937_64 rng(o.seed);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  while (static_cast<int>(starts.size()) < o.restarts) {
    std::vector<double> x(mm);
    double sum = 0.0;
    for (auto& xi : x) sum += (xi = gamma(rng));
    for (auto& xi : x) xi /= sum;
    starts.push_back(std::move(x));
  }
  return starts;
}

inline SelectionOptimum optimize_selection(const throughput::PartitionSet& omega,
                                           const std::vector<double>& values, int m,
                                           const Options& o = {}) {
  const SelectionObjective obj(omega, values, m);
  const auto starts = restart_points(m, o);
  const auto runs = parallel_map(
      starts.size(), [&](std::size_t i) { return detail::projected_ascent(obj, starts[i], o); },
      o.threads);
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (runs[i].f > runs[best].f + 1e-12 * std::abs(runs[best].f)) best = i;

  SelectionOptimum out;
  out.probs = runs[best].x;
  out.nt = runs[best].f;
  out.stationarity = runs[best].stationarity;
  out.converged = out.stationarity <= o.pg_tol;
  out.partition_values = values;
  return out;
}

/// Grid search over the simplex at spacing 1/resolution followed by a compass
/// search along the edge directions e_i - e_j. Independent of the gradient.
inline SelectionOptimum selection_grid_search(const throughput::PartitionSet& omega,
                                              const std::vector<double>& values, int m,
                                              int resolution = 100) {
  const SelectionObjective obj(omega, values, m);
  const auto mm = static_cast<std::size_t>(m);
  std::vector<double> best_x(mm, 1.0 / m);
  double best_f = obj.value(best_x);
  std::vector<int> k(mm, 0);
  auto rec = [&](auto&& self, std::size_t j, int remaining) -> void {
    if (j + 1 == mm) {
      k[j] = remaining;
      std::vector<double> x(mm);
      for (std::size_t i = 0; i < mm; ++i) x[i] = static_cast<double>(k[i]) / resolution;
      const double f = obj.value(x);
      if (f > best_f) {
        best_f = f;
        best_x = x;
      }
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      k[j] = c;
      self(self, j + 1, remaining - c);
    }
  };
  rec(rec, 0, resolution);

  for (double h = 1.0 / resolution; h > 1e-12;) {
    bool improved = false;
    for (std::size_t i = 0; i < mm; ++i) {
      for (std::size_t j = 0; j < mm; ++j) {
        if (i == j) continue;
        const double d = std::min(h, best_x[j]);
        if (d <= 0.0) continue;
        auto x = best_x;
        x[i] += d;
        x[j] -= d;
        const double f = obj.value(x);
        if (f > best_f) {
          best_f = f;
          best_x = x;
          improved = true;
        }
      }
    }
    if (!improved) h *= 0.5;
  }
  SelectionOptimum out;
  out.probs = best_x;
  out.nt = best_f;
  out.stationarity = detail::stationarity(obj, best_x);
  out.partition_values = values;
  return out;
}

// ---------------------------------------------------------------------------
// Full configuration and baselines.

struct Configuration {
  ChannelTable channels;
  SelectionOptimum selection;
  double nt = 0.0;
};

inline Configuration optimize_all(const Scenario& scenario, const Options& o = {}) {
  const Scenario s = validate(scenario);
  Configuration c;
  c.channels = optimize_channels(s, o);
  const auto omega = throughput::enumerate_partitions(s.num_sus, s.num_channels());
  const auto values = build_partition_values(omega, c.channels.rates);
  c.selection = optimize_selection(omega, values, s.num_channels(), o);
  c.nt = c.selection.nt;
  return c;
}

struct ThroughputReport {
  std::string label;
  std::vector<double> probs;          // empty for the fixed assignment
  std::vector<double> channel_nt;     // per-channel contribution (fixed assignment)
  double nt = 0.0;
};

/// Equal selection probabilities with per-channel optimized sensing.
inline ThroughputReport baseline_equal(const Scenario& s, const ChannelTable& table) {
  ThroughputReport r;
  r.label = "equal";
  r.probs.assign(static_cast<std::size_t>(s.num_channels()), 1.0 / s.num_channels());
  const auto omega = throughput::enumerate_partitions(s.num_sus, s.num_channels());
  r.nt = throughput::network_throughput(omega, r.probs, table.rates);
  return r;
}

inline ThroughputReport baseline_equal(const Scenario& s, const Options& o = {}) {
  return baseline_equal(validate(s), optimize_channels(validate(s), o));
}

/// Fixed assignment of N/M SUs to every channel.
inline ThroughputReport baseline_fixed(const Scenario& s, const ChannelTable& table) {
  const int m = s.num_channels();
  if (s.num_sus % m != 0)
    throw ValidationError({"num_sus: fixed assignment needs the channel count (" +
                           std::to_string(m) + ") to divide N (" + std::to_string(s.num_sus) +
                           ")"});
  ThroughputReport r;
  r.label = "fixed";
  const int share = s.num_sus / m;
  for (int j = 0; j < m; ++j) {
    r.channel_nt.push_back(table.rates.at(j, share));
    r.nt += r.channel_nt.back();
  }
  return r;
}

inline ThroughputReport baseline_fixed(const Scenario& s, const Options& o = {}) {
  const Scenario v = validate(s);
  if (v.num_sus % v.num_channels() != 0) return baseline_fixed(v, ChannelTable{});
  return baseline_fixed(v, optimize_channels(v, o));
}

struct Comparison {
  Configuration proposed;
  ThroughputReport equal;
  ThroughputReport fixed;     // NaN throughput when has_fixed is false
  double gain_equal_pct = 0.0;
  double gain_fixed_pct = 0.0;
  bool has_fixed = true;      // false when M does not divide N
};

inline double gain_pct(double proposed, double baseline) {
  return 100.0 * (proposed - baseline) / baseline;
}

/// Proposed configuration against both baselines on one shared optimum table.
inline Comparison compare(const Scenario& scenario, const Options& o = {}) {
  const Scenario s = validate(scenario);
  Comparison c;
  c.proposed.channels = optimize_channels(s, o);
  const auto omega = throughput::enumerate_partitions(s.num_sus, s.num_channels());
  const auto values = build_partition_values(omega, c.proposed.channels.rates);
  c.proposed.selection = optimize_selection(omega, values, s.num_channels(), o);
  c.proposed.nt = c.proposed.selection.nt;
  c.equal = baseline_equal(s, c.proposed.channels);
  c.gain_equal_pct = gain_pct(c.proposed.nt, c.equal.nt);
  c.has_fixed = s.num_sus % s.num_channels() == 0;
  if (c.has_fixed) {
    c.fixed = baseline_fixed(s, c.proposed.channels);
    c.gain_fixed_pct = gain_pct(c.proposed.nt, c.fixed.nt);
  } else {
    c.fixed.label = "fixed";
    c.fixed.nt = c.gain_fixed_pct = std::numeric_limits<double>::quiet_NaN();
  }
  return c;
}

} // namespace mfdc::opt
