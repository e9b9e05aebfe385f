#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace handfit {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic random source. All draws go through explicit mappings instead
// of std distributions, whose output is implementation defined; mt19937_64
// itself is bit-exact across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : base_(seed), gen_(splitmix64(seed)) {}

  std::uint64_t bits() { return gen_(); }

  // uniform in [0, 1) with 53-bit resolution
  double u01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // Box-Muller; the spare value is cached so the draw sequence is fixed
  double normal(double mu = 0.0, double sigma = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mu + sigma * spare_;
    }
    double u1 = 0.0;
    do { u1 = u01(); } while (u1 <= 0.0);
    double u2 = u01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return mu + sigma * r * std::cos(a);
  }

  // uniform integer in [0, n), n > 0
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(u01() * static_cast<double>(n)) % n;
  }

  // independent child stream; parallel consumers each split once per work
  // item so results do not depend on evaluation order
  Rng split(std::uint64_t stream) const {
    return Rng(splitmix64(base_ ^ splitmix64(stream + 0x51ed2701ULL)));
  }

 private:
  std::uint64_t base_ = 0;
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace handfit
