#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fagh/data.hpp"
#include "fagh/models.hpp"

namespace fagh {

/// Metrics for one communication round, evaluated on the updated global model.
struct RoundRecord {
  std::size_t round = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  double wall_time_s = 0.0;
  std::size_t uplink_scalars = 0;
  std::size_t downlink_scalars = 0;
  bool fallback = false;

  // Not part of the CSV schema.
  std::size_t skipped_clients = 0;
  std::optional<double> server_lr;  // FedExP extrapolated step size
};

struct Evaluation {
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
};

Evaluation evaluate_global(const ModelSpec& spec, const ParamVector& w, const Dataset& train,
                           const Dataset& test);

/// For each target, the first round whose test accuracy reaches it, or
/// nullopt when no round does.
std::vector<std::optional<std::size_t>> rounds_to_target(std::span<const RoundRecord> records,
                                                         std::span<const double> targets);

/// Marker printed for an unreached target.
inline constexpr const char* kUnreached = "...";

std::string format_rounds(const std::optional<std::size_t>& rounds);

inline constexpr const char* kCsvHeader =
    "round,train_loss,test_loss,test_accuracy,wall_time_s,uplink_scalars,downlink_scalars,"
    "fallback";

/// CSV text for the records: header line then one row per record, floats
/// with 9 significant digits.
std::string to_csv(std::span<const RoundRecord> records);

void write_csv(std::span<const RoundRecord> records, const std::filesystem::path& path);

/// Parses a file produced by write_csv. Throws FormatError on malformed input.
std::vector<RoundRecord> read_csv(const std::filesystem::path& path);

}  // namespace fagh
