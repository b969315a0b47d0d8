#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "fagh/config.hpp"
#include "fagh/numkit.hpp"

namespace fagh {

// Process exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitSelftest = 3;

/// Runs the experiment, writes the CSV and prints a one-line summary.
int cmd_run(const ExperimentConfig& config, std::ostream& out, std::ostream& err);

/// Parses the config first; parse errors exit with kExitConfig.
int cmd_run(const std::optional<std::filesystem::path>& config_file,
            const ConfigOverrides& overrides, std::ostream& out, std::ostream& err);

/// Rounds-to-target table, one row per CSV. Targets are accuracies in [0, 1].
int cmd_table(const std::vector<std::filesystem::path>& csv_paths,
              const std::vector<double>& targets, std::ostream& out, std::ostream& err);

/// Prints the per-client class histogram of the configured partition.
int cmd_partition_stats(const ExperimentConfig& config, std::ostream& out, std::ostream& err);

using Rank1Solver = std::function<Rank1Solve(const ParamVector&, const ParamVector&, double,
                                             double)>;

struct SelftestOptions {
  /// Solver checked by the dense-solve suite; replaceable for mutation tests.
  Rank1Solver solver = rank1_regularized_solve;
};

/// Runs the built-in oracle suites. Returns kExitOk when all pass,
/// kExitSelftest otherwise.
int cmd_selftest(std::ostream& out, const SelftestOptions& options = {});

}  // namespace fagh
