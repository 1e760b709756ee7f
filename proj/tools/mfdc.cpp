#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfdc/cli.hpp"

int main(int argc, char** argv) {
  using mfdc::cli::Command;
  using mfdc::cli::Metric;

  CLI::App app{"Multi-channel full-duplex cognitive MAC: analysis, optimization and simulation"};
  app.require_subcommand(1);

  mfdc::cli::RunManifest manifest;
  std::vector<std::string> axes;
  std::uint64_t seed = 0;
  std::string metric = "evaluate";

  const std::map<std::string, std::pair<Command, std::string>> commands{
      {"evaluate", {Command::evaluate, "Network throughput at the scenario's own configuration"}},
      {"optimize", {Command::optimize, "Optimize sensing time, sensing power and channel selection"}},
      {"simulate", {Command::simulate, "Monte Carlo simulation against the analytical model"}},
      {"sweep", {Command::sweep, "Evaluate a metric along one or two scenario keys"}},
      {"compare", {Command::compare, "Optimized configuration against the two baselines"}},
  };
  for (const auto& [name, info] : commands) {
    auto* sub = app.add_subcommand(name, info.second);
    sub->add_option("--scenario", manifest.scenario_path, "Scenario file")->required();
    sub->add_option("--out", manifest.output_dir,
                    std::string("Output directory (default: $") + mfdc::cli::kOutDirEnv +
                        " or ./out)");
    sub->add_option("--seed", seed, "Seed for the simulator and optimizer restarts");
    sub->callback([&manifest, cmd = info.first] { manifest.command = cmd; });
    if (info.first == Command::sweep) {
      sub->add_option("--axis", axes, "key=start:stop:steps (up to two)")->required();
      sub->add_option("--metric", metric, "evaluate | optimize | compare")
          ->check(CLI::IsMember({"evaluate", "optimize", "compare"}));
      sub->add_flag("--with-sim", manifest.with_sim, "Attach a simulation to every point");
    }
    if (info.first == Command::simulate)
      sub->add_option("--trace", manifest.trace_path, "Write a JSON-lines event trace");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return mfdc::cli::kValidation;
  }

  for (auto* sub : app.get_subcommands())
    if (sub->count("--seed")) manifest.seed = seed;
  if (metric == "optimize") manifest.metric = Metric::optimize;
  if (metric == "compare") manifest.metric = Metric::compare;
  try {
    for (const auto& a : axes) manifest.axes.push_back(mfdc::cli::parse_axis(a));
  } catch (const mfdc::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return mfdc::cli::kValidation;
  }
  return mfdc::cli::run(manifest, std::cout, std::cerr);
}
