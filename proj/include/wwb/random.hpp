#pragma once

// Counter-derived random streams. Every (seed, stream kind, replicate id)
// triple maps to its own engine state, so a replicate's draws never depend on
// which thread produced them or on how many replicates ran before it.

#include <cstdint>
#include <random>

namespace wwb {

/// Independent stream families. Gaussian paths and digit sequences never
/// share a generator.
enum class StreamKind : std::uint64_t {
  Gaussian = 0x6761757373ULL,
  Digits = 0x6469676974ULL,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// 64-bit key for the stream (seed, kind, replicate).
inline std::uint64_t derive_stream_key(std::uint64_t seed, StreamKind kind, std::uint64_t replicate) {
  std::uint64_t s = seed;
  std::uint64_t k = splitmix64(s);
  s = k ^ static_cast<std::uint64_t>(kind);
  k = splitmix64(s);
  s = k ^ replicate;
  return splitmix64(s);
}

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, StreamKind kind, std::uint64_t replicate) {
    std::uint64_t key = derive_stream_key(seed, kind, replicate);
    std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                      static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32)};
    engine_.seed(seq);
  }

  double normal() { return normal_(engine_); }

  /// Uniform on {0, ..., b-1}.
  unsigned digit(unsigned b) { return std::uniform_int_distribution<unsigned>(0, b - 1)(engine_); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace wwb
