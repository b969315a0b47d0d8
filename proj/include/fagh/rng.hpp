#pragma once

#include <cstdint>
#include <random>

namespace fagh {

/// Purpose tags that separate random streams drawn from one master seed.
enum class StreamTag : std::uint64_t {
  kParticipants = 1,
  kMinibatch = 2,
  kLocalShuffle = 3,
  kInit = 4,
  kDirichlet = 5,
  kShards = 6,
  kSynthMeans = 7,
  kSynthSamples = 8,
};

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Hashes (master_seed, tag, round, client) into a 64-bit stream seed. Every
/// stream is a pure function of its key, so results do not depend on the
/// order in which clients are processed.
constexpr std::uint64_t stream_seed(std::uint64_t master_seed, StreamTag tag,
                                    std::uint64_t round = 0, std::uint64_t client = 0) noexcept {
  std::uint64_t h = mix64(master_seed);
  h = mix64(h ^ static_cast<std::uint64_t>(tag));
  h = mix64(h ^ round);
  h = mix64(h ^ client);
  return h;
}

inline std::mt19937_64 make_stream(std::uint64_t master_seed, StreamTag tag,
                                   std::uint64_t round = 0, std::uint64_t client = 0) {
  return std::mt19937_64(stream_seed(master_seed, tag, round, client));
}

}  // namespace fagh
