#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fagh/models.hpp"

namespace fagh {

enum class Split { kTrain, kTest };

/// A labelled sample pool.
struct Dataset {
  Batch samples;
  std::size_t num_classes = 2;
  Split split = Split::kTrain;

  std::size_t size() const noexcept { return samples.size(); }
  std::size_t input_dim() const noexcept { return samples.input_dim; }
  Batch subset(std::span<const std::size_t> indices) const { return samples.gather(indices); }
  /// Per-class sample counts.
  std::vector<std::size_t> class_counts() const;
};

/// Gaussian class clusters. Class c has mean separation * u_c with u_c a
/// random unit direction derived from `seed` alone, so train and test splits
/// generated with the same seed share their means. Noise is unit-variance and
/// labels are assigned round-robin (balanced to within one per class).
Dataset synth_classification(std::uint64_t seed, std::size_t n, std::size_t input_dim,
                             std::size_t num_classes, double separation,
                             Split split = Split::kTrain);

/// Reads an IDX image file (magic 0x00000803) and an IDX label file (magic
/// 0x00000801). Pixels are scaled by 1/255. num_classes is max(label) + 1,
/// but at least 2.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, Split split = Split::kTrain);

/// Client id -> sorted sample indices. Lists are pairwise disjoint.
struct DataPartition {
  std::vector<std::vector<std::size_t>> assignments;
  std::size_t dropped = 0;  // samples not assigned to any client

  std::size_t num_clients() const noexcept { return assignments.size(); }
  std::size_t assigned() const noexcept;

  friend bool operator==(const DataPartition&, const DataPartition&) = default;
};

/// Per class, draws client proportions P ~ Dir_K(alpha) and hands each client
/// its share of that class's samples. Shares are rounded by largest
/// remainder (ties to the lower client id) so every class is fully
/// allocated.
DataPartition dirichlet_partition(const Dataset& dataset, std::size_t num_clients, double alpha,
                                  std::uint64_t seed);

/// Label-sorted shards: sorts indices by label, cuts num_shards equal
/// contiguous shards (leftovers dropped) and deals shards_per_client shuffled
/// shards to each of num_shards / shards_per_client clients.
DataPartition shard_partition(const Dataset& dataset, std::size_t num_shards,
                              std::size_t shards_per_client, std::uint64_t seed);

/// num_clients x num_classes table of sample counts.
using ClassHistogram = std::vector<std::vector<std::size_t>>;

ClassHistogram partition_stats(const DataPartition& partition, const Dataset& dataset);

}  // namespace fagh
