#pragma once

// Batch front-end shared by the mfdc executable and the tests.
//
// Every command loads one scenario file, writes CSV files into the output
// directory and prints a plain-text summary. CSV files are written to a
// temporary name and renamed when complete; on any error all files of the run
// are removed again.

#include <cstdio>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ios>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "mfdc/config.hpp"
#include "mfdc/core.hpp"
#include "mfdc/optimizer.hpp"
#include "mfdc/parallel.hpp"
#include "mfdc/simulator.hpp"
#include "mfdc/throughput.hpp"

namespace mfdc::cli {

namespace fs = std::filesystem;

inline constexpr const char* kOutDirEnv = "MFDC_OUT_DIR";

enum Exit : int { kOk = 0, kFailure = 1, kValidation = 2, kNumerical = 3, kIo = 4 };

enum class Command { evaluate, optimize, simulate, sweep, compare };

/// What a sweep computes at each point.
enum class Metric { evaluate, optimize, compare };

struct Axis {
  std::string key;
  double start = 0.0;
  double stop = 0.0;
  int steps = 2;

  double at(int i) const {
    if (i == steps - 1) return stop;
    return start + (stop - start) * static_cast<double>(i) / static_cast<double>(steps - 1);
  }
};

struct RunManifest {
  Command command = Command::evaluate;
  std::string scenario_path;
  std::string output_dir;
  std::vector<Axis> axes;
  std::optional<std::uint64_t> seed;
  bool with_sim = false;
  Metric metric = Metric::evaluate;
  std::string trace_path; // simulate only
};

inline std::string to_string(Command c) {
  switch (c) {
    case Command::evaluate: return "evaluate";
    case Command::optimize: return "optimize";
    case Command::simulate: return "simulate";
    case Command::sweep: return "sweep";
    case Command::compare: return "compare";
  }
  return "?";
}

/// Parses `key=start:stop:steps`.
inline Axis parse_axis(const std::string& text) {
  const auto eq = text.rfind('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError({"--axis: expected key=start:stop:steps, got '" + text + "'"});
  Axis a;
  a.key = text.substr(0, eq);
  const std::string range = text.substr(eq + 1);
  const auto c1 = range.find(':');
  const auto c2 = c1 == std::string::npos ? c1 : range.find(':', c1 + 1);
  if (c2 == std::string::npos)
    throw ValidationError({"--axis " + a.key + ": expected start:stop:steps, got '" + range + "'"});
  try {
    a.start = config::detail::to_double(a.key, range.substr(0, c1));
    a.stop = config::detail::to_double(a.key, range.substr(c1 + 1, c2 - c1 - 1));
    a.steps = static_cast<int>(config::detail::to_int(a.key, range.substr(c2 + 1)));
  } catch (const config::ParseError& e) {
    throw ValidationError({std::string("--axis ") + e.what()});
  }
  return a;
}

inline std::vector<std::string> check(const RunManifest& m) {
  std::vector<std::string> issues;
  if (m.scenario_path.empty()) issues.emplace_back("--scenario: required");
  if (m.command == Command::sweep) {
    if (m.axes.empty()) issues.emplace_back("--axis: sweep needs at least one axis");
    if (m.axes.size() > 2) issues.emplace_back("--axis: at most two axes");
    std::set<std::string> keys;
    for (const auto& a : m.axes) {
      if (a.steps < 2) issues.push_back("--axis " + a.key + ": steps must be >= 2");
      if (a.steps > 100000) issues.push_back("--axis " + a.key + ": steps must be <= 100000");
      if (!std::isfinite(a.start) || !std::isfinite(a.stop))
        issues.push_back("--axis " + a.key + ": bounds must be finite");
      if (!keys.insert(a.key).second) issues.push_back("--axis " + a.key + ": repeated key");
    }
    if (m.with_sim && m.metric != Metric::evaluate)
      issues.emplace_back("--with-sim: only supported with --metric evaluate");
  } else {
    if (!m.axes.empty()) issues.emplace_back("--axis: only valid for sweep");
    if (m.metric != Metric::evaluate) issues.emplace_back("--metric: only valid for sweep");
  }
  if (!m.trace_path.empty() && m.command != Command::simulate)
    issues.emplace_back("--trace: only valid for simulate");
  return issues;
}

inline std::string default_output_dir() {
  const char* env = std::getenv(kOutDirEnv);
  return env != nullptr && *env != '\0' ? std::string(env) : std::string("out");
}

// ---------------------------------------------------------------------------
// Formatting.

inline std::string num(double x, int digits = 12) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

inline std::string fixed(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

using Row = std::vector<std::string>;

/// Column-aligned plain-text table.
inline void print_table(std::ostream& out, const Row& header, const std::vector<Row>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  auto measure = [&](const Row& r) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i)
      width[i] = std::max(width[i], r[i].size());
  };
  measure(header);
  for (const auto& r : rows) measure(r);
  auto line = [&](const Row& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out << "  ";
      out << r[i];
      if (i + 1 < r.size()) out << std::string(width[i] - r[i].size(), ' ');
    }
    out << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& r : rows) line(r);
}

/// Tracks every CSV written during a run so a failure can remove them.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}
  Outputs(const Outputs&) = delete;
  Outputs& operator=(const Outputs&) = delete;
  ~Outputs() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : written_) fs::remove(p, ec);
  }

  void write_csv(const std::string& name, const Row& header, const std::vector<Row>& rows) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw std::ios_base::failure("cannot create output directory '" + dir_.string() + "'");
    const fs::path path = dir_ / name;
    const fs::path tmp = dir_ / (name + ".partial");
    written_.push_back(tmp);
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) throw std::ios_base::failure("cannot write '" + tmp.string() + "'");
      auto emit = [&f](const Row& r) {
        for (std::size_t i = 0; i < r.size(); ++i) f << (i ? "," : "") << r[i];
        f << '\n';
      };
      emit(header);
      for (const auto& r : rows) emit(r);
      f.flush();
      if (!f) throw std::ios_base::failure("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, path, ec);
    if (ec) throw std::ios_base::failure("cannot rename '" + tmp.string() + "' to '" + path.string() + "'");
    written_.back() = path;
  }

  void commit() { committed_ = true; }
  const std::vector<fs::path>& files() const { return written_; }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
  bool committed_ = false;
};

// ---------------------------------------------------------------------------
// Commands.

namespace detail {

inline void check_finite(double x, const std::string& what) {
  if (!std::isfinite(x)) throw NumericalError(what + " is not finite");
}

inline Row probs_header(int m, const std::string& prefix = "prob_") {
  Row h;
  for (int j = 0; j < m; ++j) h.push_back(prefix + std::to_string(j));
  return h;
}

inline void append(Row& r, const Row& more) { r.insert(r.end(), more.begin(), more.end()); }

inline Row probs_row(const std::vector<double>& p) {
  Row r;
  for (double x : p) r.push_back(num(x));
  return r;
}

inline int evaluate(const config::RunConfig& rc, Outputs& out, std::ostream& os) {
  const Scenario s = validate(rc.scenario);
  const auto table = throughput::rate_table(s);
  const auto omega = throughput::enumerate_partitions(s.num_sus, s.num_channels());
  const auto contrib = throughput::channel_contributions(omega, s.selection_probs, table);
  double nt = 0.0;
  for (double c : contrib) nt += c;
  check_finite(nt, "network throughput");

  const Row header{"channel", "selection_prob", "threshold", "false_alarm", "bits_per_phase",
                   "nt_contribution"};
  std::vector<Row> rows;
  for (int j = 0; j < s.num_channels(); ++j) {
    const auto setup = channel_setup(s, j);
    const auto sp = sensing::solve_threshold(setup);
    const double bits = throughput::channel_bits(setup, sp).total();
    rows.push_back({std::to_string(j), num(s.selection_probs[static_cast<std::size_t>(j)]),
                    num(sp.threshold), num(sp.false_alarm), num(bits),
                    num(contrib[static_cast<std::size_t>(j)])});
  }
  rows.push_back({"all", "1", "", "", "", num(nt)});
  out.write_csv("evaluate.csv", header, rows);
  print_table(os, header, rows);
  os << "\nnetwork throughput: " << fixed(nt, 4) << " bits/s/Hz\n";
  return kOk;
}

inline int optimize(const config::RunConfig& rc, Outputs& out, std::ostream& os) {
  const Scenario s = validate(rc.scenario);
  const auto cfg = opt::optimize_all(s, rc.opt);
  check_finite(cfg.nt, "optimized throughput");
  const auto omega = throughput::enumerate_partitions(s.num_sus, s.num_channels());
  const auto contrib =
      throughput::channel_contributions(omega, cfg.selection.probs, cfg.channels.rates);

  const Row header{"channel",        "selection_prob", "sensing_time_ms", "sensing_power_db",
                   "threshold",      "false_alarm",    "bits_per_phase",  "nt_contribution"};
  std::vector<Row> rows;
  for (int j = 0; j < s.num_channels(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const auto& o = cfg.channels.optima[ju].front();
    rows.push_back({std::to_string(j), num(cfg.selection.probs[ju]), num(o.t_s_opt * 1e3),
                    num(linear_to_db(o.p_sen_opt)), num(o.threshold), num(o.false_alarm),
                    num(o.bits), num(contrib[ju])});
  }
  rows.push_back({"all", "1", "", "", "", "", "", num(cfg.nt)});
  out.write_csv("optimize.csv", header, rows);
  print_table(os, header, rows);
  os << "\noptimized network throughput: " << fixed(cfg.nt, 4) << " bits/s/Hz"
     << (cfg.selection.converged ? "" : " (selection step did not converge)") << '\n';
  return kOk;
}

inline int simulate(const config::RunConfig& rc, const RunManifest& m, Outputs& out,
                    std::ostream& os) {
  const Scenario s = validate(rc.scenario);
  if (auto issues = sim::check(rc.sim); !issues.empty()) throw ValidationError(std::move(issues));
  const double analytic = throughput::evaluate(s);

  sim::SimConfig sc = rc.sim;
  std::ofstream trace;
  if (!m.trace_path.empty()) {
    trace.open(m.trace_path, std::ios::binary | std::ios::trunc);
    if (!trace) throw std::ios_base::failure("cannot open trace file '" + m.trace_path + "'");
    sc.trace = &trace;
  }
  const auto r = sim::simulate(s, sc);
  if (trace.is_open() && !trace.flush())
    throw std::ios_base::failure("write failed for '" + m.trace_path + "'");
  check_finite(r.throughput, "simulated throughput");

  const auto& c = r.counters;
  const Row header{"metric", "value"};
  const std::vector<Row> rows{
      {"analytic_nt", num(analytic)},
      {"simulated_nt", num(r.throughput)},
      {"ci95_halfwidth", num(r.ci_halfwidth)},
      {"relative_difference_pct", num(100.0 * (analytic - r.throughput) / r.throughput)},
      {"bits_per_phase", num(r.bits_per_phase)},
      {"epochs", std::to_string(c.epochs)},
      {"data_phases", std::to_string(c.data_phases)},
      {"contention_cycles", std::to_string(c.contention_cycles)},
      {"collisions", std::to_string(c.collisions)},
      {"idle_slots", std::to_string(c.idle_slots)},
      {"aborted_contentions", std::to_string(c.aborted_contentions)},
      {"false_alarms", std::to_string(c.false_alarms)},
      {"detections", std::to_string(c.detections)},
      {"missed_detections", std::to_string(c.missed_detections)},
      {"pu_overlap_s", num(c.pu_overlap_time)},
  };
  std::vector<Row> batches;
  for (std::size_t b = 0; b < r.batch_throughput.size(); ++b)
    batches.push_back({std::to_string(b), num(r.batch_throughput[b])});
  out.write_csv("simulate.csv", header, rows);
  out.write_csv("simulate_batches.csv", {"batch", "throughput"}, batches);
  print_table(os, header, rows);
  return kOk;
}

inline int compare(const config::RunConfig& rc, Outputs& out, std::ostream& os) {
  const Scenario s = validate(rc.scenario);
  const auto c = opt::compare(s, rc.opt);
  const int m = s.num_channels();
  Row header{"algorithm", "nt", "delta_nt_equal_pct", "delta_nt_fixed_pct"};
  append(header, probs_header(m));
  std::vector<Row> rows;
  const auto opt_num = [&](double x) { return c.has_fixed ? num(x) : std::string(); };
  Row prop{"proposed", num(c.proposed.nt), num(c.gain_equal_pct), opt_num(c.gain_fixed_pct)};
  append(prop, probs_row(c.proposed.selection.probs));
  Row eq{"equal", num(c.equal.nt), "", ""};
  append(eq, probs_row(c.equal.probs));
  Row fx{"fixed", opt_num(c.fixed.nt), "", ""};
  const int share = s.num_sus / m;
  for (int j = 0; j < m; ++j) fx.push_back(c.has_fixed ? "n=" + std::to_string(share) : "");
  rows = {prop, eq, fx};
  check_finite(c.proposed.nt, "optimized throughput");
  out.write_csv("compare.csv", header, rows);

  Row h2{"algorithm", "NT", "dNT_equal(%)", "dNT_fixed(%)"};
  append(h2, probs_header(m, "p"));
  std::vector<Row> pretty;
  const auto opt_fixed = [&](double x, int d) { return c.has_fixed ? fixed(x, d) : std::string("n/a"); };
  Row pp{"proposed", fixed(c.proposed.nt, 4), fixed(c.gain_equal_pct, 2), opt_fixed(c.gain_fixed_pct, 2)};
  for (double p : c.proposed.selection.probs) pp.push_back(fixed(p, 4));
  Row pe{"equal", fixed(c.equal.nt, 4), "-", "-"};
  for (double p : c.equal.probs) pe.push_back(fixed(p, 4));
  Row pf{"fixed", opt_fixed(c.fixed.nt, 4), "-", "-"};
  for (int j = 0; j < m; ++j) pf.push_back(c.has_fixed ? "n=" + std::to_string(share) : "-");
  pretty = {pp, pe, pf};
  print_table(os, h2, pretty);
  if (!c.has_fixed)
    os << "\nfixed assignment skipped: " << m << " channels do not divide " << s.num_sus << " SUs\n";
  return kOk;
}

/// Applies the axis values to a copy of the configuration. Returns nullopt when
/// the point is infeasible because swept selection probabilities exceed one.
inline std::optional<config::RunConfig> sweep_point(const config::RunConfig& base,
                                                    const std::vector<Axis>& axes,
                                                    const std::vector<double>& values) {
  config::RunConfig rc = base;
  std::set<std::size_t> swept_probs;
  static const std::regex prob_key(R"(selection_probs\[(\d+)\])");
  for (std::size_t a = 0; a < axes.size(); ++a) {
    config::set(rc, axes[a].key, num(values[a], 17));
    std::smatch mm;
    if (std::regex_match(axes[a].key, mm, prob_key)) swept_probs.insert(std::stoul(mm[1].str()));
  }
  if (!swept_probs.empty()) {
    auto& p = rc.scenario.selection_probs;
    std::optional<std::size_t> rest;
    for (std::size_t j = p.size(); j-- > 0;)
      if (!swept_probs.count(j)) {
        rest = j;
        break;
      }
    if (!rest) throw ValidationError({"--axis: at least one selection probability must stay unswept"});
    double others = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j)
      if (j != *rest) others += p[j];
    const double remainder = 1.0 - others;
    if (remainder < -1e-12) return std::nullopt;
    p[*rest] = std::max(0.0, remainder);
  }
  return rc;
}

struct SweepResult {
  bool feasible = false;
  Row cells;
};

inline int sweep(const config::RunConfig& base, const RunManifest& m, Outputs& out,
                 std::ostream& os) {
  for (const auto& a : m.axes) {
    config::RunConfig probe = base;
    config::set(probe, a.key, num(a.start, 17));
  }
  const int m_channels = static_cast<int>(base.scenario.channels.size());
  std::vector<std::vector<double>> points;
  const int n0 = m.axes[0].steps;
  const int n1 = m.axes.size() > 1 ? m.axes[1].steps : 1;
  for (int i = 0; i < n0; ++i)
    for (int k = 0; k < n1; ++k) {
      std::vector<double> v{m.axes[0].at(i)};
      if (m.axes.size() > 1) v.push_back(m.axes[1].at(k));
      points.push_back(v);
    }

  Row header;
  for (const auto& a : m.axes) header.push_back(a.key);
  switch (m.metric) {
    case Metric::evaluate:
      header.push_back("nt");
      if (m.with_sim) append(header, {"sim_nt", "sim_ci95_halfwidth"});
      break;
    case Metric::optimize:
      header.push_back("nt");
      append(header, probs_header(m_channels));
      break;
    case Metric::compare:
      append(header, {"nt_proposed", "nt_equal", "nt_fixed", "delta_nt_equal_pct",
                      "delta_nt_fixed_pct"});
      break;
  }

  auto run_point = [&](std::size_t i) {
    SweepResult r;
    auto rc = sweep_point(base, m.axes, points[i]);
    if (!rc) return r;
    rc->opt.threads = 1;
    const Scenario s = validate(rc->scenario);
    r.feasible = true;
    switch (m.metric) {
      case Metric::evaluate: {
        const double nt = throughput::evaluate(s);
        check_finite(nt, "network throughput");
        r.cells.push_back(num(nt));
        if (m.with_sim) {
          if (auto issues = sim::check(rc->sim); !issues.empty())
            throw ValidationError(std::move(issues));
          const auto sr = sim::simulate(s, rc->sim);
          append(r.cells, {num(sr.throughput), num(sr.ci_halfwidth)});
        }
        break;
      }
      case Metric::optimize: {
        const auto c = opt::optimize_all(s, rc->opt);
        check_finite(c.nt, "optimized throughput");
        r.cells.push_back(num(c.nt));
        append(r.cells, probs_row(c.selection.probs));
        break;
      }
      case Metric::compare: {
        const auto c = opt::compare(s, rc->opt);
        check_finite(c.proposed.nt, "optimized throughput");
        append(r.cells, {num(c.proposed.nt), num(c.equal.nt), c.has_fixed ? num(c.fixed.nt) : "",
                         num(c.gain_equal_pct), c.has_fixed ? num(c.gain_fixed_pct) : ""});
        break;
      }
    }
    return r;
  };
  const auto results = parallel_map(points.size(), run_point, base.opt.threads);

  std::vector<Row> rows;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!results[i].feasible) {
      ++skipped;
      continue;
    }
    Row r;
    for (double v : points[i]) r.push_back(num(v));
    append(r, results[i].cells);
    rows.push_back(std::move(r));
  }
  out.write_csv("sweep.csv", header, rows);
  print_table(os, header, rows);
  if (skipped) os << '\n' << skipped << " infeasible point(s) skipped\n";
  return kOk;
}

} // namespace detail

/// Executes one manifest. Diagnostics go to `err`, summaries to `out`.
inline int run(const RunManifest& m, std::ostream& out, std::ostream& err) {
  try {
    if (auto issues = check(m); !issues.empty()) throw ValidationError(std::move(issues));
    config::RunConfig rc = config::load(m.scenario_path);
    if (m.seed) {
      rc.sim.seed = *m.seed;
      rc.opt.seed = *m.seed;
    }
    Outputs files(m.output_dir.empty() ? default_output_dir() : m.output_dir);
    int code = kOk;
    switch (m.command) {
      case Command::evaluate: code = detail::evaluate(rc, files, out); break;
      case Command::optimize: code = detail::optimize(rc, files, out); break;
      case Command::simulate: code = detail::simulate(rc, m, files, out); break;
      case Command::sweep: code = detail::sweep(rc, m, files, out); break;
      case Command::compare: code = detail::compare(rc, files, out); break;
    }
    files.commit();
    return code;
  } catch (const ValidationError& e) {
    err << "error: invalid input\n";
    for (const auto& issue : e.issues) err << "  " << issue << '\n';
    return kValidation;
  } catch (const config::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::ios_base::failure& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

} // namespace mfdc::cli
