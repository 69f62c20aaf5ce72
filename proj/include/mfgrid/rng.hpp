#pragma once

#include <cmath>
#include <cstdint>

namespace mfgrid::rng {

// splitmix64 finalizer; full 64-bit avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum class Purpose : std::uint64_t {
  kBusScale = 1,
  kGenCost = 2,
  kWeather = 3,
  kAgentNoise = 4,
  kRegen = 5,
  kAgentInit = 6,
  kShockArrival = 7,
  kShockMagnitude = 8,
  kLipschitz = 9,
  kOracle = 10,
};

// Counter-based stream: the key fixes the stream identity, draws advance a
// counter through the splitmix64 sequence. Streams keyed on disjoint tuples
// never collide in practice and are independent of evaluation order, which
// is what makes parallel simulation bitwise reproducible.
class Stream {
 public:
  Stream() = default;

  static Stream keyed(std::uint64_t seed, Purpose purpose, std::uint64_t a = 0,
                      std::uint64_t b = 0, std::uint64_t c = 0,
                      std::uint64_t d = 0) {
    std::uint64_t k = mix64(seed);
    k = mix64(k ^ static_cast<std::uint64_t>(purpose));
    k = mix64(k ^ a);
    k = mix64(k ^ b);
    k = mix64(k ^ c);
    k = mix64(k ^ d);
    Stream s;
    s.key_ = k;
    return s;
  }

  std::uint64_t next_u64() { return mix64(key_ + counter_++ * kGamma); }

  // Uniform on [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Integer uniform on [0, n).
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

  bool bernoulli(double p) { return next_double() < p; }

  // Inverse-CDF triangular draw on [lo, hi] with the given mode.
  double triangular(double lo, double mode, double hi) {
    if (hi <= lo) return lo;
    const double u = next_double();
    const double cut = (mode - lo) / (hi - lo);
    if (u < cut) return lo + std::sqrt(u * (hi - lo) * (mode - lo));
    return hi - std::sqrt((1.0 - u) * (hi - lo) * (hi - mode));
  }

  // Knuth multiplication method; adequate for the small rates used here.
  int poisson(double rate) {
    if (rate <= 0.0) return 0;
    const double limit = std::exp(-rate);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= next_double();
    } while (p > limit);
    return k - 1;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace mfgrid::rng
