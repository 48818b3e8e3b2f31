#pragma once

#include <cstdint>
#include <random>

#include "cfsim/rational.hpp"

namespace cfsim {

// Seeded generator with a platform-independent bounded draw (std::uniform_*
// distributions are not specified bit-exactly across standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

  // Independent stream for task `task` under `master`; used to split work
  // across parallel tasks without making results depend on scheduling.
  static Rng stream(std::uint64_t master, std::uint64_t task, std::uint64_t sub = 0) {
    return Rng(mix(master ^ mix(task + 0x9e3779b97f4a7c15ULL * (sub + 1))));
  }

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do v = engine_();
    while (v >= limit);
    return v % n;
  }

  // Uniform on [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  bool coin() { return (engine_() >> 63) != 0; }

  // Uniform on the grid {lo + k (hi-lo)/steps : 0 <= k <= steps}.
  Rational grid_point(const Rational& lo, const Rational& hi, std::uint64_t steps) {
    std::uint64_t k = below(steps + 1);
    return lo + (hi - lo) * Rational(Integer(static_cast<unsigned long>(k)), Integer(static_cast<unsigned long>(steps)));
  }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cfsim
