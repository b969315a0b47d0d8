#include "fagh/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string>

#include "fagh/errors.hpp"
#include "fagh/rng.hpp"

namespace fagh {

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : samples.labels) ++counts.at(static_cast<std::size_t>(y));
  return counts;
}

std::size_t DataPartition::assigned() const noexcept {
  std::size_t total = 0;
  for (const auto& a : assignments) total += a.size();
  return total;
}

Dataset synth_classification(std::uint64_t seed, std::size_t n, std::size_t input_dim,
                             std::size_t num_classes, double separation, Split split) {
  if (num_classes < 2) throw InvalidArgument("synth_classification: need at least 2 classes");
  if (input_dim == 0) throw InvalidArgument("synth_classification: input_dim must be positive");
  if (n < num_classes) throw InvalidArgument("synth_classification: n must be >= num_classes");
  if (!(separation >= 0.0) || !std::isfinite(separation)) {
    throw InvalidArgument("synth_classification: separation must be finite and >= 0");
  }

  std::normal_distribution<double> normal(0.0, 1.0);

  auto mean_rng = make_stream(seed, StreamTag::kSynthMeans);
  std::vector<double> means(num_classes * input_dim);
  for (std::size_t c = 0; c < num_classes; ++c) {
    double* m = &means[c * input_dim];
    double norm = 0.0;
    while (norm == 0.0) {
      norm = 0.0;
      for (std::size_t k = 0; k < input_dim; ++k) {
        m[k] = normal(mean_rng);
        norm += m[k] * m[k];
      }
    }
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < input_dim; ++k) m[k] *= separation / norm;
  }

  Dataset ds;
  ds.num_classes = num_classes;
  ds.split = split;
  ds.samples.input_dim = input_dim;
  ds.samples.features.resize(n * input_dim);
  ds.samples.labels.resize(n);
  auto rng = make_stream(seed, StreamTag::kSynthSamples, split == Split::kTrain ? 0 : 1);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t c = j % num_classes;
    ds.samples.labels[j] = static_cast<int>(c);
    for (std::size_t k = 0; k < input_dim; ++k) {
      ds.samples.features[j * input_dim + k] = means[c * input_dim + k] + normal(rng);
    }
  }
  return ds;
}

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class BigEndianReader {
 public:
  BigEndianReader(const std::vector<unsigned char>& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  std::uint32_t u32() {
    require(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_++];
    return v;
  }

  std::span<const unsigned char> take(std::size_t count) {
    require(count);
    std::span<const unsigned char> out(bytes_.data() + pos_, count);
    pos_ += count;
    return out;
  }

 private:
  void require(std::size_t count) const {
    if (bytes_.size() - pos_ < count) {
      throw FormatError("'" + path_.string() + "': truncated IDX file");
    }
  }

  const std::vector<unsigned char>& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, Split split) {
  const auto image_bytes = read_file(images_path);
  const auto label_bytes = read_file(labels_path);

  BigEndianReader images(image_bytes, images_path);
  if (auto magic = images.u32(); magic != kIdxImagesMagic) {
    throw FormatError("'" + images_path.string() + "': bad IDX image magic " + hex32(magic));
  }
  const std::size_t n = images.u32();
  const std::size_t rows = images.u32();
  const std::size_t cols = images.u32();

  BigEndianReader labels(label_bytes, labels_path);
  if (auto magic = labels.u32(); magic != kIdxLabelsMagic) {
    throw FormatError("'" + labels_path.string() + "': bad IDX label magic " + hex32(magic));
  }
  const std::size_t n_labels = labels.u32();
  if (n != n_labels) {
    throw FormatError("IDX count mismatch: '" + images_path.string() + "' has " +
                      std::to_string(n) + " images, '" + labels_path.string() + "' has " +
                      std::to_string(n_labels) + " labels");
  }
  if (n == 0) throw FormatError("'" + images_path.string() + "': IDX file holds no samples");
  if (rows * cols == 0) throw FormatError("'" + images_path.string() + "': zero-sized images");

  const auto pixels = images.take(n * rows * cols);
  const auto raw_labels = labels.take(n);

  Dataset ds;
  ds.split = split;
  ds.samples.input_dim = rows * cols;
  ds.samples.features.resize(pixels.size());
  std::transform(pixels.begin(), pixels.end(), ds.samples.features.begin(),
                 [](unsigned char p) { return static_cast<double>(p) / 255.0; });
  ds.samples.labels.assign(raw_labels.begin(), raw_labels.end());
  const int max_label = *std::max_element(ds.samples.labels.begin(), ds.samples.labels.end());
  ds.num_classes = std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1);
  return ds;
}

DataPartition dirichlet_partition(const Dataset& dataset, std::size_t num_clients, double alpha,
                                  std::uint64_t seed) {
  if (num_clients == 0) throw InvalidArgument("dirichlet_partition: need at least one client");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw InvalidArgument("dirichlet_partition: alpha must be positive");
  }

  std::vector<std::vector<std::size_t>> by_class(dataset.num_classes);
  for (std::size_t j = 0; j < dataset.size(); ++j) {
    by_class.at(static_cast<std::size_t>(dataset.samples.labels[j])).push_back(j);
  }

  DataPartition part;
  part.assignments.resize(num_clients);
  std::vector<double> props(num_clients);
  std::vector<std::size_t> alloc(num_clients);
  std::vector<std::size_t> order(num_clients);

  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto rng = make_stream(seed, StreamTag::kDirichlet, c);
    std::gamma_distribution<double> gamma(alpha, 1.0);
    double total = 0.0;
    for (auto& p : props) {
      p = gamma(rng);
      total += p;
    }
    if (!(total > 0.0)) {
      std::fill(props.begin(), props.end(), 1.0);
      total = static_cast<double>(num_clients);
    }
    for (auto& p : props) p /= total;

    auto& members = by_class[c];
    std::shuffle(members.begin(), members.end(), rng);

    // Largest-remainder rounding of props * count.
    const std::size_t count = members.size();
    std::size_t floor_sum = 0;
    std::vector<double> remainder(num_clients);
    for (std::size_t k = 0; k < num_clients; ++k) {
      const double quota = props[k] * static_cast<double>(count);
      alloc[k] = std::min(count, static_cast<std::size_t>(std::floor(quota)));
      remainder[k] = quota - static_cast<double>(alloc[k]);
      floor_sum += alloc[k];
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    // The deficit is a sum of K fractional parts, hence < K.
    for (std::size_t r = 0; floor_sum < count; ++r) {
      ++alloc[order[r % num_clients]];
      ++floor_sum;
    }

    std::size_t pos = 0;
    for (std::size_t k = 0; k < num_clients; ++k) {
      auto& dst = part.assignments[k];
      dst.insert(dst.end(), members.begin() + static_cast<std::ptrdiff_t>(pos),
                 members.begin() + static_cast<std::ptrdiff_t>(pos + alloc[k]));
      pos += alloc[k];
    }
  }
  for (auto& a : part.assignments) std::sort(a.begin(), a.end());
  return part;
}

DataPartition shard_partition(const Dataset& dataset, std::size_t num_shards,
                              std::size_t shards_per_client, std::uint64_t seed) {
  if (num_shards == 0 || shards_per_client == 0) {
    throw InvalidArgument("shard_partition: shard counts must be positive");
  }
  if (num_shards % shards_per_client != 0) {
    throw InvalidArgument("shard_partition: " + std::to_string(num_shards) +
                          " shards cannot be split evenly into groups of " +
                          std::to_string(shards_per_client));
  }
  const std::size_t n = dataset.size();
  const std::size_t shard_size = n / num_shards;
  if (shard_size == 0) {
    throw InvalidArgument("shard_partition: " + std::to_string(n) + " samples are too few for " +
                          std::to_string(num_shards) + " shards");
  }

  std::vector<std::size_t> sorted(n);
  std::iota(sorted.begin(), sorted.end(), std::size_t{0});
  const auto& labels = dataset.samples.labels;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });

  std::vector<std::size_t> shard_ids(num_shards);
  std::iota(shard_ids.begin(), shard_ids.end(), std::size_t{0});
  auto rng = make_stream(seed, StreamTag::kShards);
  std::shuffle(shard_ids.begin(), shard_ids.end(), rng);

  DataPartition part;
  const std::size_t num_clients = num_shards / shards_per_client;
  part.assignments.resize(num_clients);
  for (std::size_t k = 0; k < num_clients; ++k) {
    auto& dst = part.assignments[k];
    dst.reserve(shards_per_client * shard_size);
    for (std::size_t s = 0; s < shards_per_client; ++s) {
      const std::size_t shard = shard_ids[k * shards_per_client + s];
      auto first = sorted.begin() + static_cast<std::ptrdiff_t>(shard * shard_size);
      dst.insert(dst.end(), first, first + static_cast<std::ptrdiff_t>(shard_size));
    }
    std::sort(dst.begin(), dst.end());
  }
  part.dropped = n - num_shards * shard_size;
  return part;
}

ClassHistogram partition_stats(const DataPartition& partition, const Dataset& dataset) {
  ClassHistogram table(partition.num_clients(), std::vector<std::size_t>(dataset.num_classes, 0));
  for (std::size_t k = 0; k < partition.num_clients(); ++k) {
    for (auto idx : partition.assignments[k]) {
      if (idx >= dataset.size()) {
        throw InvalidArgument("partition_stats: sample index " + std::to_string(idx) +
                              " out of range for dataset of size " +
                              std::to_string(dataset.size()));
      }
      ++table[k][static_cast<std::size_t>(dataset.samples.labels[idx])];
    }
  }
  return table;
}

}  // namespace fagh
