#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace icelut {

// Deterministic random source. Only raw mt19937_64 output is consumed;
// uniform/normal transforms are done by hand so streams are reproducible
// across standard library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1), 53-bit resolution
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, bound)
  std::uint32_t uniform_u32(std::uint32_t bound) {
    return static_cast<std::uint32_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  std::uint8_t byte() { return static_cast<std::uint8_t>(uniform_u32(256)); }

  // Box-Muller; second value cached
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    double theta = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  // Independent substream, stable under changes to how much the parent
  // stream has been consumed.
  Rng fork(std::uint64_t stream_id) const {
    std::uint64_t x = seed_ ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1));
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    x = x ^ (x >> 31);
    return Rng(x);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace icelut
