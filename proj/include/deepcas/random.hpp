#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace deepcas {

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Order-sensitive hash of a seed path, e.g. derive_seed(run_seed, subsystem, tag).
template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t first, Rest... rest) noexcept {
  std::uint64_t h = mix64(first);
  ((h = mix64(h ^ mix64(static_cast<std::uint64_t>(rest) + 0x632be59bd9b4e019ULL))), ...);
  return h;
}

// Stream tags for derive_seed.
enum class StreamTag : std::uint64_t {
  run = 1,
  agent = 2,
  network_init = 3,
  episode = 4,
  plant_noise = 5,
  evaluation = 6,
  baseline = 7,
};

constexpr std::uint64_t tag(StreamTag t) noexcept { return static_cast<std::uint64_t>(t); }

// Owns one pseudo-random stream. Not thread-safe; give each worker its own.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed = 0) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  // Uniform on [0, 1).
  double uniform() { return std::generate_canonical<double, 53>(engine_); }
  // Uniform on {0, ..., n-1}; n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  // Textual engine + distribution state, enough to resume the stream exactly.
  std::string serialize() const;
  static RandomSource deserialize(const std::string& state);

  friend bool operator==(const RandomSource& a, const RandomSource& b) {
    return a.engine_ == b.engine_ && a.normal_ == b.normal_;
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace deepcas
