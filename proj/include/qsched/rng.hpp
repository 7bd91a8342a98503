#pragma once

#include <cstdint>
#include <string_view>

namespace qsched {

/// One step of the splitmix64 sequence (Steele/Lea/Flood). Used for seed
/// expansion and substream derivation only, never as a run generator.
inline std::uint64_t splitmix64_next(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// xoshiro256** 1.0 (Blackman & Vigna, public-domain reference algorithm),
/// seeded through splitmix64 as its authors recommend.
///
/// The standard library's engines are portable but its distributions are not;
/// this class pins both the generator and the derived draws (uniform01,
/// below, bernoulli) to documented bit-exact algorithms so that any run is
/// reproducible from its recorded seed on any platform. The generator name
/// below is what run metadata records.
class Rng {
 public:
  static constexpr std::string_view kName = "xoshiro256**-1.0";

  explicit Rng(std::uint64_t seed = 1) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64_next(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) built from the top 53 bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in {0, ..., n-1}, unbiased via rejection sampling.
  std::uint64_t below(std::uint64_t n) {
    // Reject the low remainder zone so every residue is equally likely
    // (arc4random_uniform's construction).
    const std::uint64_t min = (0 - n) % n;
    std::uint64_t r = next_u64();
    while (r < min) r = next_u64();
    return r % n;
  }

  /// Bernoulli draw with success probability p.
  bool bernoulli(double p) { return uniform01() < p; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4]{};
};

/// Derives the seed of an independent substream from a master seed.
/// Substream k's seed is the (k+1)-th output of the splitmix64 sequence
/// started at `master`; distinct indices give statistically independent
/// xoshiro256** states. Index 0 is the environment stream and index 1 the
/// agent stream throughout this project.
inline std::uint64_t derive_stream_seed(std::uint64_t master, unsigned index) {
  std::uint64_t x = master;
  std::uint64_t out = 0;
  for (unsigned i = 0; i <= index; ++i) out = splitmix64_next(x);
  return out;
}

}  // namespace qsched
