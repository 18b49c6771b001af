#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mlrwl {

// Seeded generator with hand-rolled distributions so that streams are
// bit-identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Strictly inside (0, 1).
  double uniform01() {
    return (static_cast<double>(gen_() >> 12) + 0.5) * (1.0 / 4503599627370496.0);
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Standard normal via Box-Muller; consumes exactly two draws.
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [lo, hi] inclusive, unbiased.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
    const std::uint64_t range = hi - lo + 1;
    const std::uint64_t limit = range == 0 ? 0 : (~std::uint64_t{0}) - (~std::uint64_t{0}) % range;
    std::uint64_t draw = gen_();
    while (range != 0 && draw >= limit) draw = gen_();
    return range == 0 ? draw : lo + draw % range;
  }

  // Independent child stream; replicate r of a run seeded with s uses
  // derive(s, r) so parallel schedules see identical streams.
  static std::uint64_t derive(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master ^ (0x9E3779B97F4A7C15ull * (stream + 1));
    zsplit(z);
    z ^= z >> 31;
    return z;
  }

 private:
  static void zsplit(std::uint64_t& z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  }

  std::mt19937_64 gen_;
};

}  // namespace mlrwl
