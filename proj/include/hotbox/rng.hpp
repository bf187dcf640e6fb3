#pragma once

#include <cstdint>
#include <random>

namespace hotbox::rng {

// SplitMix64 finalizer; used to turn (seed, stream, counter) tuples into
// well-separated engine seeds.
constexpr std::uint64_t mix(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Seed for substream `counter` of stream `stream` under `seed`. Independent of
// the order in which substreams are requested.
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream,
                                       std::uint64_t counter) noexcept {
  return mix(mix(mix(seed) ^ stream) ^ (counter * 0xD6E8FEB86659FD93ull));
}

// Counter-based generator: output n is mix(seed + n * golden gamma). Cheap
// to construct and to jump, which is what per-packet substreams need.
class Engine {
 public:
  using result_type = std::uint64_t;

  constexpr explicit Engine(std::uint64_t seed = 0) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  constexpr result_type operator()() noexcept {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  constexpr void discard(std::uint64_t n) noexcept { state_ += n * 0x9E3779B97F4A7C15ull; }

  friend constexpr bool operator==(const Engine&, const Engine&) = default;

 private:
  std::uint64_t state_;
};

inline Engine substream(std::uint64_t seed, std::uint64_t stream,
                        std::uint64_t counter) {
  return Engine{substream_seed(seed, stream, counter)};
}

}  // namespace hotbox::rng
