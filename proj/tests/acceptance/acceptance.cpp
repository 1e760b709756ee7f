// Acceptance runner: one PASS/FAIL line per criterion, details indented below.
// AC7 only reports; it never changes the exit status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mfdc/mfdc.hpp"
#include "support.hpp"

using namespace mfdc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string summary;
  std::vector<std::string> details;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    details.push_back(std::string(ok ? "ok    " : "FAILED") + "  " + what);
  }
  void note(const std::string& what) { details.push_back("        " + what); }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path g_scenarios = "scenarios";

Scenario load(const std::string& name) { return config::load((g_scenarios / name).string()).scenario; }
config::RunConfig load_run(const std::string& name) { return config::load((g_scenarios / name).string()); }

// ---------------------------------------------------------------------------

Outcome ac1() {
  Outcome o;
  const MacTimings t;
  const double z = stats::normal_critical(0.99);
  const std::pair<int, double> cases[] = {{1, 0.3}, {2, 0.5}, {5, 0.05}, {20, 0.01}, {50, 0.0022}};
  int inside = 0;
  std::uint64_t seed = 101;
  for (auto [n, p] : cases) {
    const auto sim = sim::simulate_contention_only(n, p, t, 1000000, seed++);
    const auto a = contention::mean_contention(n, p, t);
    auto check = [&](const char* name, const stats::Accumulator& acc, double analytic) {
      const double hw = z * acc.std_error();
      const bool ok = std::abs(acc.mean() - analytic) <= hw;
      inside += ok;
      o.require(ok, fmt("(n=%d, p=%g) %-14s analytic %.6g  sim %.6g +- %.3g", n, p, name, analytic,
                        acc.mean(), hw));
    };
    check("T_cont [s]", sim.contention, a.mean_contention);
    check("T_idle [slots]", sim.idle_run, a.mean_idle_slots);
    check("N_coll", sim.collisions, a.mean_collisions);
  }
  o.summary = fmt("contention oracle: %d/15 analytic means inside 99%% CIs over 1e6 cycles", inside);
  return o;
}

Outcome ac2() {
  Outcome o;
  double worst_slot = 0.0;
  for (int n = 1; n <= 64; ++n)
    for (int k = 0; k < 50; ++k) {
      const double p = 0.001 * std::pow(0.5 / 0.001, k / 49.0);
      const auto s = contention::slot_probs(n, p);
      worst_slot = std::max(worst_slot, std::abs(s.succ + s.idle + s.coll - 1.0));
    }
  o.require(worst_slot <= 1e-12, fmt("slot probabilities sum to 1 on 64x50 grid, worst %.2e", worst_slot));

  double worst_mass = 0.0, worst_mean = 0.0;
  int pairs = 0, skipped = 0;
  for (int n : {1, 2, 5, 10, 20, 50, 64})
    for (double p : {0.0022, 0.01, 0.05, 0.1, 0.3, 0.5}) {
      const auto b = contention::mean_contention(n, p, MacTimings{});
      if (b.mean_collisions > 1e4) {
        ++skipped;
        continue;
      }
      ++pairs;
      double mc = 0, ec = 0, mi = 0, ei = 0;
      for (int x = 0; x < 1000000; ++x) {
        const double pc = contention::collision_count_pmf(n, p, x);
        const double pi = contention::idle_run_pmf(n, p, x);
        mc += pc;
        ec += x * pc;
        mi += pi;
        ei += x * pi;
        if (x > 10 && pc * (x + 1) < 1e-17 && pi * (x + 1) < 1e-17) break;
      }
      worst_mass = std::max({worst_mass, std::abs(mc - 1), std::abs(mi - 1)});
      worst_mean = std::max({worst_mean, std::abs(ec - b.mean_collisions) / std::max(1.0, b.mean_collisions),
                             std::abs(ei - b.mean_idle_slots) / std::max(1.0, b.mean_idle_slots)});
    }
  o.require(worst_mass <= 1e-9, fmt("geometric pmfs sum to 1 on %d (n, p) pairs, worst %.2e", pairs, worst_mass));
  o.note(fmt("%d pair(s) with more than 1e4 expected collisions left out of the direct summation", skipped));
  o.require(worst_mean <= 1e-9, fmt("pmf means match closed forms, worst %.2e", worst_mean));

  std::mt19937_64 rng(202);
  std::gamma_distribution<double> g(1.0, 1.0);
  double worst_multi = 0.0;
  const auto omega3 = throughput::enumerate_partitions(30, 3);
  const auto omega5 = throughput::enumerate_partitions(12, 5);
  for (int k = 0; k < 100; ++k) {
    const auto& omega = k % 2 ? omega5 : omega3;
    std::vector<double> p(k % 2 ? 5 : 3);
    double s = 0;
    for (auto& x : p) s += (x = g(rng));
    for (auto& x : p) x /= s;
    double mass = 0;
    for (const auto& w : omega) mass += throughput::partition_probability(w, p);
    worst_multi = std::max(worst_multi, std::abs(mass - 1));
  }
  o.require(worst_multi <= 1e-10, fmt("multinomial masses sum to 1 at 100 simplex points, worst %.2e", worst_multi));
  o.summary = "probability identities";
  return o;
}

Outcome ac3() {
  Outcome o;
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double ts = 1e-4 + 9.9e-3 * u(rng), psen = db_to_linear(15.0) * u(rng);
    const SelfInterference si{0.9 * u(rng), u(rng)};
    const ChannelModel ch{0.1 + 1.9 * u(rng), 0.05, 0.01};
    const auto sp = sensing::solve_threshold(ts, psen, 6e6, ch, si, 0.8);
    worst = std::max(worst, std::abs(sensing::avg_detection(sp.threshold, ts, psen, 6e6, ch, si) - 0.8));
  }
  o.require(worst <= 1e-8, fmt("threshold round trip to target 0.8 on 20 configs, worst %.2e", worst));

  const ChannelModel ch{1.0, 0.05, 0.01};
  const SelfInterference si{0.2, 0.95};
  const double ts = 3e-3, psen = db_to_linear(5.689);
  const auto sp = sensing::solve_threshold(ts, psen, 6e6, ch, si, 0.8);
  std::mt19937_64 mc(304);
  const double norm = -std::expm1(-ts / ch.mean_idle);
  stats::Accumulator acc;
  for (int i = 0; i < 1000000; ++i) {
    const double t = -ch.mean_idle * std::log1p(-u(mc) * norm);
    acc.add(oracle::pd01(std::min(t, ts), sp.threshold, ts, psen, 6e6, ch.pu_power, si.zeta, si.xi));
  }
  const double dev = std::abs(acc.mean() - sp.avg_detection);
  o.require(dev <= 3 * acc.std_error(),
            fmt("Monte Carlo average %.8f vs quadrature %.8f, |diff| %.2e <= 3 SE %.2e", acc.mean(),
                sp.avg_detection, dev, 3 * acc.std_error()));

  bool pf_mono = true, pd_mono = true;
  int pf_checked = 0;
  for (double zeta : {0.0, 0.2, 0.6})
    for (double t_s : {1e-4, 1e-3, 5e-3}) {
      double prev = 2.0;
      for (int i = 0; i < 1000; ++i) {
        const double v = sensing::false_alarm_h00(1.0 + 0.002 * i, t_s, 3.0, 6e6, {zeta, 0.95});
        if (v > 0 && prev < 1 - 1e-12) {
          ++pf_checked;
          if (!(v < prev)) pf_mono = false;
        }
        prev = v;
      }
      for (double eps : {1.0, 1.05, 1.2}) {
        prev = 2.0;
        for (int i = 0; i <= 1000; ++i) {
          const double v = sensing::detection_h01(t_s * i / 1000.0, eps, t_s, 3.0, 6e6, 0.05, {zeta, 0.95});
          if (v > prev + 1e-15) pd_mono = false;
          prev = v;
        }
      }
    }
  o.require(pf_mono && pf_checked > 1000,
            fmt("false alarm strictly decreasing in threshold on dense grids (%d steps resolvable inside (0,1))",
                pf_checked));
  o.require(pd_mono, "detection non-increasing in PU arrival time on dense grids");
  o.summary = "sensing math";
  return o;
}

Outcome ac4() {
  Outcome o;
  const auto rc = load_run("validation_2x10.cfg");
  const double analytic = throughput::evaluate(rc.scenario);
  const auto r = sim::simulate(rc.scenario, rc.sim);
  const double rel = std::abs(analytic - r.throughput) / r.throughput;
  o.require(r.counters.data_phases >= 100000, fmt("%llu data phases simulated",
                                                  static_cast<unsigned long long>(r.counters.data_phases)));
  o.require(rel <= 0.03, fmt("analytic %.5f vs simulated %.5f +- %.5f (95%% CI), relative gap %.2f%%", analytic,
                             r.throughput, r.ci_halfwidth, 100 * rel));
  auto literal = rc.scenario;
  literal.model.pu_deferral = false;
  o.note(fmt("without the PU deferral term the analytic value would be %.5f (gap %.2f%%)",
             throughput::evaluate(literal),
             100 * std::abs(throughput::evaluate(literal) - r.throughput) / r.throughput));
  o.summary = fmt("model vs simulator within 3%% (gap %.2f%%)", 100 * rel);
  return o;
}

Outcome ac5() {
  Outcome o;
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_channel = 0.0;
  for (int k = 0; k < 5; ++k) {
    Scenario s;
    s.channels[0] = ChannelModel{0.05 + 1.5 * u(rng), 0.02 + 0.3 * u(rng), db_to_linear(-25 + 15 * u(rng))};
    s.si = {u(rng), 0.5 + 0.5 * u(rng)};
    s.proto.data_power = db_to_linear(5 + 15 * u(rng));
    s.proto.max_power = db_to_linear(10 + 10 * u(rng));
    s.proto.sensing_power = 0.5 * s.proto.max_power;
    const int n = 1 + static_cast<int>(49 * u(rng));
    const auto setup = channel_setup(s, 0);
    const auto opt = opt::optimize_channel(setup, n);
    const int g = 200;
    const auto values = parallel_map(static_cast<std::size_t>(g * g), [&](std::size_t i) {
      const double ts = setup.proto.frame * (static_cast<double>(i / g) + 1) / g;
      const double ps = setup.proto.max_power * static_cast<double>(i % g) / (g - 1);
      return throughput::throughput_from_bits(setup, opt::bits_at(setup, ts, ps), n);
    });
    const double grid = *std::max_element(values.begin(), values.end());
    const double rel = std::abs(opt.nt_opt - grid) / grid;
    worst_channel = std::max(worst_channel, rel);
    o.require(rel <= 0.005, fmt("channel config %d (n=%d): optimizer %.6f, 200x200 grid %.6f, T_S* %.3f ms, P_sen* %.2f dB",
                                k, n, opt.nt_opt, grid, opt.t_s_opt * 1e3, linear_to_db(opt.p_sen_opt)));
  }

  auto selection_case = [&](const std::string& label, const throughput::PartitionSet& omega,
                            const std::vector<double>& values, int m) {
    const auto a = opt::optimize_selection(omega, values, m);
    const auto b = opt::selection_grid_search(omega, values, m);
    const double rel = std::abs(a.nt - b.nt) / b.nt;
    o.require(rel <= 1e-4, fmt("%s: gradient %.8f vs grid+refine %.8f (rel %.1e)", label.c_str(), a.nt, b.nt, rel));
  };
  for (const char* name : {"table_2x20_idle100.cfg", "table_2x20_idle500.cfg", "table_3x30_idle500_50.cfg",
                           "selection_3x50.cfg"}) {
    const auto s = load(name);
    const auto table = opt::optimize_channels(s);
    const auto omega = throughput::enumerate_partitions(s.num_sus, s.num_channels());
    selection_case(name, omega, opt::build_partition_values(omega, table.rates), s.num_channels());
  }
  for (int m : {2, 3}) {
    const int n_sus = 25;
    const auto omega = throughput::enumerate_partitions(n_sus, m);
    throughput::RateTable t(m, n_sus);
    for (int j = 0; j < m; ++j) {
      const double base = 0.5 + 3 * u(rng), curve = 0.1 * u(rng);
      for (int n = 1; n <= n_sus; ++n) t.set(j, n, base / (1 + curve * n));
    }
    selection_case(fmt("random table M=%d", m), omega, opt::build_partition_values(omega, t), m);
  }

  // Exhaustive small instance.
  auto s = load("table_2x20_idle100.cfg");
  s.num_sus = 4;
  const auto all = opt::optimize_all(s);
  throughput::RateTable brute(2, 4);
  const int g = 80;
  for (int j = 0; j < 2; ++j) {
    const auto setup = channel_setup(s, j);
    const auto bits = parallel_map(static_cast<std::size_t>(g * g), [&](std::size_t i) {
      const double ts = setup.proto.frame * (static_cast<double>(i / g) + 1) / g;
      const double ps = setup.proto.max_power * static_cast<double>(i % g) / (g - 1);
      return opt::bits_at(setup, ts, ps);
    });
    for (int n = 1; n <= 4; ++n) {
      double best = 0.0;
      for (double b : bits) best = std::max(best, throughput::throughput_from_bits(setup, b, n));
      brute.set(j, n, best);
    }
  }
  const auto omega = throughput::enumerate_partitions(4, 2);
  double best = 0.0, best_p = 0.0;
  for (int k = 0; k <= 1000; ++k) {
    const double p = k / 1000.0;
    const double v = throughput::network_throughput(omega, {p, 1 - p}, brute);
    if (v > best) best = v, best_p = p;
  }
  const double rel = std::abs(all.nt - best) / best;
  o.require(rel <= 0.01, fmt("N=4, M=2 exhaustive: optimize_all %.6f (p1 %.4f) vs brute force %.6f (p1 %.3f)", all.nt,
                             all.selection.probs[0], best, best_p));
  o.summary = fmt("optimizer correctness (worst channel gap %.3f%%)", 100 * worst_channel);
  return o;
}

Outcome ac6() {
  Outcome o;
  const double tol = 1e-9;
  auto row = [&](const std::string& name, const opt::Comparison& c) {
    std::string probs;
    for (double p : c.proposed.selection.probs) probs += fmt(" %.4f", p);
    o.note(fmt("%-28s proposed %.4f  equal %.4f  fixed %.4f  gains %.3f%% / %.3f%%  p*:%s", name.c_str(),
               c.proposed.nt, c.equal.nt, c.fixed.nt, c.gain_equal_pct, c.gain_fixed_pct, probs.c_str()));
  };

  // (a) identical channels.
  {
    const auto c = opt::compare(load("table_3x30_idle1000_1000.cfg"));
    row("identical (1000,1000,1000)", c);
    o.require(std::abs(c.proposed.nt - c.equal.nt) <= tol * c.equal.nt && std::abs(c.gain_equal_pct) <= 1e-6,
              "(a) identical channels: proposed = equal selection, gain 0");
    o.require(std::abs(c.proposed.nt - c.fixed.nt) <= 1e-6 * c.fixed.nt,
              fmt("(a) identical channels: proposed = fixed assignment (rel gap %.2e)",
                  std::abs(c.proposed.nt - c.fixed.nt) / c.fixed.nt));
  }

  // (b) heterogeneous tables.
  for (const char* name : {"table_2x20_idle100.cfg", "table_2x20_idle500.cfg", "table_2x20_idle1000.cfg",
                           "table_3x30_idle50_50.cfg", "table_3x30_idle500_50.cfg", "table_3x30_idle1000_50.cfg",
                           "table_3x30_idle500_500.cfg"}) {
    const auto s = load(name);
    const auto c = opt::compare(s);
    row(name, c);
    bool differ = false;
    for (const auto& ch : s.channels)
      differ = differ || ch.mean_idle != s.channels[0].mean_idle || ch.mean_active != s.channels[0].mean_active;
    bool ok = c.proposed.nt >= c.equal.nt * (1 - tol) && c.equal.nt >= 0 && c.proposed.nt >= c.fixed.nt * (1 - tol);
    if (differ) ok = ok && c.gain_equal_pct > 0 && c.gain_fixed_pct > 0;
    o.require(ok, fmt("(b) %s: proposed >= both baselines%s", name, differ ? ", strictly positive gains" : ""));
  }

  // (c) busiest channel gets the smallest probability.
  {
    const auto cfg = opt::optimize_all(load("selection_3x50.cfg"));
    const auto& p = cfg.selection.probs;
    o.note(fmt("selection_3x50: p* = (%.4f, %.4f, %.4f), NT %.4f", p[0], p[1], p[2], cfg.nt));
    o.require(p[1] < p[0] && p[1] < p[2], "(c) busiest channel (mean active 250 ms) has the smallest probability");
  }

  // (d) gains along the self-interference sweep.
  {
    const auto base = load("zeta_3x60.cfg");
    std::vector<double> g1, g2;
    for (int k = 0; k < 8; ++k) {
      auto s = base;
      s.si.zeta = 0.2 + 0.1 * k;
      const auto c = opt::compare(s);
      g1.push_back(c.gain_equal_pct);
      g2.push_back(c.gain_fixed_pct);
      row(fmt("zeta %.1f", s.si.zeta), c);
    }
    bool mono = true;
    for (std::size_t k = 1; k < g1.size(); ++k)
      mono = mono && g1[k] >= g1[k - 1] - 1e-6 && g2[k] >= g2[k - 1] - 1e-6;
    o.require(mono, "(d) gains over both baselines non-decreasing in zeta on [0.2, 0.9]");
    const double spread = std::max(*std::max_element(g1.begin(), g1.end()) - *std::min_element(g1.begin(), g1.end()),
                                   *std::max_element(g2.begin(), g2.end()) - *std::min_element(g2.begin(), g2.end()));
    o.note(fmt("gain spread across the sweep: %.3g percentage points", spread));
  }
  o.summary = "structural claims";
  return o;
}

Outcome ac7() {
  Outcome o;
  int flagged = 0;
  auto report = [&](const std::string& what, double ours, double reference) {
    const double dev = std::abs(ours - reference) / std::abs(reference);
    flagged += dev > 0.10;
    o.note(fmt("%-34s ours %-10.4f reference %-10.4f deviation %6.1f%%%s", what.c_str(), ours, reference, 100 * dev,
               dev > 0.10 ? "  [>10%]" : ""));
  };
  {
    const auto s = load("selection_3x50.cfg");
    const auto c = opt::optimize_channel(channel_setup(s, 0), s.num_sus);
    report("channel 1 optimum T_S* [ms]", c.t_s_opt * 1e3, 3.0);
    report("channel 1 optimum P_sen* [dB]", linear_to_db(c.p_sen_opt), 5.689);
    report("channel 1 optimum NT", c.nt_opt, 8.5723);
    const auto all = opt::optimize_all(s);
    report("selection p1*", all.selection.probs[0], 0.3571);
    report("selection p2*", all.selection.probs[1], 0.2857);
    report("selection p3*", all.selection.probs[2], 0.3572);
  }
  {
    const auto c = opt::compare(load("table_2x20_idle100.cfg"));
    report("2x20 (100 ms) proposed p1*", c.proposed.selection.probs[0], 0.3218);
    report("2x20 (100 ms) proposed NT", c.proposed.nt, 4.0893);
    report("2x20 (100 ms) equal NT", c.equal.nt, 3.7202);
    report("2x20 (100 ms) fixed NT", c.fixed.nt, 3.6930);
  }
  if (flagged)
    o.note(fmt("%d value(s) deviate by more than 10%%. Data-phase bits come from a case analysis of the", flagged)),
        o.note("frame, MAC constants are 802.11 defaults and each access cycle carries the expected PU"),
        o.note("deferral. Under that accounting the optimum sits at T_S = T, P_sen = P_max.");
  o.summary = fmt("reference operating points (non-gating): %d value(s) beyond 10%%", flagged);
  return o;
}

} // namespace

int main(int argc, char** argv) {
  std::vector<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--scenarios" && i + 1 < argc) g_scenarios = argv[++i];
    else if (a == "--only" && i + 1 < argc) only.push_back(argv[++i]);
    else {
      std::cerr << "usage: mfdc_acceptance [--scenarios DIR] [--only ACn]...\n";
      return 2;
    }
  }

  struct Criterion {
    const char* id;
    double budget_s;
    bool gating;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"AC1", 120, true, ac1}, {"AC2", 10, true, ac2},  {"AC3", 60, true, ac3},  {"AC4", 300, true, ac4},
      {"AC5", 600, true, ac5}, {"AC6", 900, true, ac6}, {"AC7", 900, false, ac7},
  };

  bool all_pass = true;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.summary = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = out.pass && in_time;
    const char* verdict = c.gating ? (pass ? "PASS" : "FAIL") : "INFO";
    std::cout << c.id << ' ' << verdict << "  " << out.summary
              << fmt("  [%.1f s of %.0f s%s]", secs, c.budget_s, in_time ? "" : ", over budget") << '\n';
    for (const auto& d : out.details) std::cout << "    " << d << '\n';
    std::cout.flush();
    if (c.gating && !pass) all_pass = false;
  }
  return all_pass ? 0 : 1;
}
