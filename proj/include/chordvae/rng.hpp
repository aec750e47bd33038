#pragma once

#include <cstdint>
#include <random>

namespace chordvae {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seedable generator. substream(key) derives an independent generator whose
// sequence depends only on (seed, key), so work split across songs or
// threads draws the same numbers as a serial run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  Rng substream(std::uint64_t key) const {
    return Rng(splitmix64(seed_ ^ splitmix64(key + 0x632be59bd9b4e019ull)));
  }

  // Uniform in the open interval (0, 1).
  double uniform_open() {
    constexpr double kTiny = 1e-12;
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
    if (u < kTiny) u = kTiny;
    if (u > 1.0 - kTiny) u = 1.0 - kTiny;
    return u;
  }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }

  bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace chordvae
