#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fagh/data.hpp"
#include "fagh/fedcore.hpp"

namespace fagh {

enum class DatasetSource { kSynthetic, kIdx };
enum class Partitioner { kDirichlet, kShards };

/// A fully validated experiment description.
///
/// The on-disk form is flat `key = value` lines; `#` starts a comment.
/// config_keys() lists every accepted key in canonical order.
struct ExperimentConfig {
  Algorithm algorithm = Algorithm::kFagh;

  ModelKind model = ModelKind::kMlr;
  std::vector<std::size_t> hidden_sizes;
  bool include_bias = true;

  DatasetSource dataset = DatasetSource::kSynthetic;
  std::size_t samples = 4000;
  std::size_t test_samples = 1000;
  std::size_t input_dim = 20;
  std::size_t num_classes = 10;
  double separation = 3.0;
  std::filesystem::path train_images, train_labels, test_images, test_labels;

  Partitioner partitioner = Partitioner::kDirichlet;
  double alpha = 0.2;
  std::size_t num_shards = 400;
  std::size_t shards_per_client = 2;

  std::size_t clients = 200;
  double participation = 0.4;
  std::size_t rounds = 100;
  std::uint64_t seed = 0;

  double eta = 0.1;
  double rho = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double local_lr = 0.1;
  std::size_t local_epochs = 1;
  BatchPolicy batch;
  double global_lr = 1.0;
  double epsilon = 1e-3;

  std::filesystem::path output;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Accepted keys, canonical order.
const std::vector<std::string>& config_keys();

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` text, then applies overrides (later wins), fills
/// defaults and validates. Requires the keys algorithm, model and dataset.
/// Throws ConfigError.
ExperimentConfig parse_config_text(const std::string& text, const ConfigOverrides& overrides = {});

/// As parse_config_text; with no file, the overrides alone must supply the
/// required keys.
ExperimentConfig parse_config(const std::optional<std::filesystem::path>& file,
                              const ConfigOverrides& overrides = {});

/// Canonical text form. parse_config_text(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// Environment variable naming the directory for the default output path.
inline constexpr const char* kOutputDirEnv = "FAGH_OUTPUT_DIR";

/// Loads or synthesises the datasets, partitions the training set and
/// builds the federation. Data errors surface as IoError / FormatError.
struct ExperimentData {
  Dataset train;
  Dataset test;
  DataPartition partition;
};
ExperimentData load_experiment_data(const ExperimentConfig& config);
ModelSpec model_spec(const ExperimentConfig& config, std::size_t input_dim,
                     std::size_t num_classes);
FederationConfig federation_config(const ExperimentConfig& config);
Federation build_federation(const ExperimentConfig& config);

}  // namespace fagh
