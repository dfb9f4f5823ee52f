#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ctn {

/// Deterministic random stream used everywhere randomness is needed.
///
/// std::mt19937_64 produces a bit stream fixed by the C++ standard, but the
/// standard *distributions* are implementation-defined, so all draws here are
/// built by hand on top of the raw 64-bit stream. Given a seed, every draw
/// sequence is identical across platforms and compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [lo, hi], inclusive. Rejection sampling on the
  /// low bits keeps the stream reproducible and unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());  // full range
    std::uint64_t mask = ~std::uint64_t{0};
    if ((span & (span - 1)) != 0 || true) {
      mask = span - 1;
      mask |= mask >> 1;
      mask |= mask >> 2;
      mask |= mask >> 4;
      mask |= mask >> 8;
      mask |= mask >> 16;
      mask |= mask >> 32;
    }
    for (;;) {
      const std::uint64_t r = next_u64() & mask;
      if (r < span) return lo + static_cast<std::int64_t>(r);
    }
  }

  /// Index in [0, n).
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(n) - 1));
  }

  /// Standard normal via Box-Muller (two uniforms per pair, cached).
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 engine_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace ctn
