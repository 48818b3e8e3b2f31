#include <cmath>

#include "cfsim/correlation.hpp"
#include "cfsim/rng.hpp"
#include "doctest.h"

using namespace cfsim;

namespace {

Rational q(std::int64_t p, std::int64_t d = 1) { return make_rational(p, d); }

Interval random_interval(Rng& rng, std::int64_t den) {
  std::int64_t lo = rng.between(-4 * den, 4 * den), len = rng.between(0, 3 * den);
  return {q(lo, den), q(lo + len, den)};
}

Interval shift(const Interval& u, const Rational& s) { return {u.lo + s, u.hi + s}; }

// Oracle: tensor midpoint rule in double precision.
double quadrature(const Interval& i1, const Interval& i2, const Interval& u, const Interval& v, int steps) {
  const double ulo = u.lo.get_d(), vlo = v.lo.get_d();
  const double du = (u.hi.get_d() - ulo) / steps, dv = (v.hi.get_d() - vlo) / steps;
  const double a1 = i1.lo.get_d(), b1 = i1.hi.get_d(), a2 = i2.lo.get_d(), b2 = i2.hi.get_d();
  double sum = 0;
  for (int x = 0; x < steps; ++x) {
    const double s = ulo + (x + 0.5) * du;
    for (int y = 0; y < steps; ++y) {
      const double t = vlo + (y + 0.5) * dv;
      sum += std::max(0.0, std::min(b1 + s, b2 + t) - std::max(a1 + s, a2 + t));
    }
  }
  return sum * du * dv;
}

}  // namespace

TEST_CASE("shifted overlap") {
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    Interval a = random_interval(rng, 4), b = random_interval(rng, 4);
    Rational d = q(rng.between(-40, 40), 5);
    CHECK(shifted_overlap(a, b, d) == overlap_length(a, shift(b, d)));
  }
}

TEST_CASE("overlap integral against quadrature") {
  Rng rng(2);
  for (int k = 0; k < 40; ++k) {
    Interval i1 = random_interval(rng, 3), i2 = random_interval(rng, 3);
    Interval u = random_interval(rng, 2), v = random_interval(rng, 2);
    const double exact = overlap_integral(i1, i2, u, v).get_d();
    const double approx = quadrature(i1, i2, u, v, 400);
    CHECK(std::abs(exact - approx) <= 1e-3 * (1 + std::abs(exact)));
  }
  // unit intervals, unit shifts: ∫∫ (1 - |s - t|) = 2/3
  Interval unit{q(0), q(1)};
  CHECK(overlap_integral(unit, unit, unit, unit) == q(2, 3));
}

TEST_CASE("lattice sum against direct sum") {
  Rng rng(3);
  for (int k = 0; k < 30; ++k) {
    Interval i1 = random_interval(rng, 2), i2 = random_interval(rng, 2);
    const std::int64_t qd = 1 + rng.below(5);
    const std::int64_t k1lo = rng.between(-6, 0), k1hi = rng.between(0, 6);
    const std::int64_t k2lo = rng.between(-6, 0), k2hi = rng.between(0, 6);
    Rational brute = 0;
    for (std::int64_t a = k1lo + 1; a <= k1hi; ++a)
      for (std::int64_t b = k2lo + 1; b <= k2hi; ++b)
        brute += overlap_length(shift(i1, q(a, qd)), shift(i2, q(b, qd)));
    CHECK(overlap_lattice_sum(i1, i2, k1lo, k1hi, k2lo, k2hi, qd) == brute);
  }
}
