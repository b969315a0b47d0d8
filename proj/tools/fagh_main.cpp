// Command-line front end: run, table, selftest, partition-stats.

#include <CLI11.hpp>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "fagh/commands.hpp"
#include "fagh/errors.hpp"

namespace {

/// Registers --config plus one --<key> flag per config key.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "key = value configuration file");
    for (const auto& key : fagh::config_keys()) {
      cmd->add_option("--" + key, values[key], "overrides config key '" + key + "'");
    }
  }

  std::optional<std::filesystem::path> file() const {
    if (config_file.empty()) return std::nullopt;
    return std::filesystem::path(config_file);
  }

  fagh::ConfigOverrides overrides(const CLI::App* cmd) const {
    fagh::ConfigOverrides out;
    for (const auto& key : fagh::config_keys()) {
      if (cmd->count("--" + key) > 0) out.emplace_back(key, values.at(key));
    }
    return out;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated learning simulator with approximated-Hessian Newton steps"};
  app.require_subcommand(1);

  ConfigFlags run_flags;
  auto* run = app.add_subcommand("run", "run one experiment and write its per-round CSV");
  run_flags.attach(run);

  ConfigFlags stats_flags;
  auto* stats = app.add_subcommand("partition-stats", "print the per-client class histogram");
  stats_flags.attach(stats);

  std::vector<std::string> csv_paths;
  std::vector<double> targets{0.30, 0.35, 0.40, 0.45};
  auto* table = app.add_subcommand("table", "rounds needed to reach each accuracy target");
  table->add_option("csv", csv_paths, "CSV files written by 'run'")->required();
  table->add_option("--targets", targets,
                    "comma-separated accuracy targets, as fractions or percentages")
      ->delimiter(',');

  auto* selftest = app.add_subcommand("selftest", "run the built-in oracle suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return fagh::kExitConfig;
  }

  if (*run) return fagh::cmd_run(run_flags.file(), run_flags.overrides(run), std::cout, std::cerr);

  if (*stats) {
    try {
      const auto config = fagh::parse_config(stats_flags.file(), stats_flags.overrides(stats));
      return fagh::cmd_partition_stats(config, std::cout, std::cerr);
    } catch (const fagh::Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return fagh::kExitConfig;
    }
  }

  if (*table) {
    std::vector<std::filesystem::path> paths(csv_paths.begin(), csv_paths.end());
    for (double& t : targets) {
      if (t > 1.0) t /= 100.0;
    }
    return fagh::cmd_table(paths, targets, std::cout, std::cerr);
  }

  if (*selftest) return fagh::cmd_selftest(std::cout);
  return fagh::kExitConfig;
}
