#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace aoitail {

// Named substreams derived from one master seed. Each subsystem owns its
// stream, so changing how many draws one subsystem makes (say, extra fading
// draws when more links share a resource block) never shifts the sequences
// seen by the others.
enum class Stream : std::uint64_t {
  placement = 1,
  mobility = 2,
  fading = 3,
  clustering = 4,
  reservoir = 5,
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace detail

class Rng {
 public:
  Rng(std::uint64_t seed, Stream stream) {
    std::uint64_t s = seed;
    detail::splitmix64(s);
    s ^= static_cast<std::uint64_t>(stream) * 0xff51afd7ed558ccdull;
    engine_.seed(detail::splitmix64(s));
  }

  std::uint64_t bits() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform index in [0, n). Rejection keeps it unbiased for any n.
  std::size_t index(std::size_t n) {
    const std::uint64_t limit = ~0ull - ~0ull % n;
    std::uint64_t v;
    do {
      v = bits();
    } while (v >= limit);
    return static_cast<std::size_t>(v % n);
  }

  // Exponential with the given mean; log1p keeps small draws accurate.
  double exponential(double mean = 1.0) { return -mean * std::log1p(-uniform()); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace aoitail
