#include "cfsim/correlation.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace cfsim {

namespace {

const Rational& rmin(const Rational& a, const Rational& b) { return b < a ? b : a; }
const Rational& rmax(const Rational& a, const Rational& b) { return a < b ? b : a; }

// |{s in U : s + d in V}|
Rational window_density(const Interval& u, const Interval& v, const Rational& d) {
  Rational hi = rmin(u.hi, Rational(v.hi - d));
  Rational lo = rmax(u.lo, Rational(v.lo - d));
  return lo < hi ? Rational(hi - lo) : Rational(0);
}

}  // namespace

Rational shifted_overlap(const Interval& i1, const Interval& i2, const Rational& d) {
  Rational hi = rmin(i1.hi, Rational(i2.hi + d));
  Rational lo = rmax(i1.lo, Rational(i2.lo + d));
  return lo < hi ? Rational(hi - lo) : Rational(0);
}

Rational overlap_integral(const Interval& i1, const Interval& i2, const Interval& u, const Interval& v) {
  if (i1.empty() || i2.empty() || u.empty() || v.empty()) return 0;
  Rational lo = rmax(Rational(i1.lo - i2.hi), Rational(v.lo - u.hi));
  Rational hi = rmin(Rational(i1.hi - i2.lo), Rational(v.hi - u.lo));
  if (!(lo < hi)) return 0;

  std::array<Rational, 8> bp = {i1.lo - i2.hi, i1.hi - i2.hi, i1.lo - i2.lo, i1.hi - i2.lo,
                                v.lo - u.hi,   v.hi - u.hi,   v.lo - u.lo,   v.hi - u.lo};
  std::vector<Rational> pts;
  pts.reserve(10);
  pts.push_back(lo);
  pts.push_back(hi);
  for (auto& p : bp)
    if (lo < p && p < hi) pts.push_back(p);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  Rational total = 0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const Rational& a = pts[k];
    const Rational& b = pts[k + 1];
    Rational m = (a + b) / 2;
    Rational fa = shifted_overlap(i1, i2, a) * window_density(u, v, a);
    Rational fm = shifted_overlap(i1, i2, m) * window_density(u, v, m);
    Rational fb = shifted_overlap(i1, i2, b) * window_density(u, v, b);
    total += (b - a) * (fa + 4 * fm + fb) / 6;
  }
  return total;
}

Rational overlap_lattice_sum(const Interval& i1, const Interval& i2, std::int64_t k1lo, std::int64_t k1hi,
                             std::int64_t k2lo, std::int64_t k2hi, std::int64_t q) {
  if (q <= 0) throw std::invalid_argument("lattice denominator must be positive");
  if (i1.empty() || i2.empty() || k1hi <= k1lo || k2hi <= k2lo) return 0;
  // g((k2 - k1)/q) > 0 only for q(l1 - h2) < e < q(h1 - l2)
  const Rational Q(static_cast<long>(q));
  std::int64_t e_lo = to_int64(floor_of(Q * (i1.lo - i2.hi))) + 1;
  std::int64_t e_hi = to_int64(ceil_of(Q * (i1.hi - i2.lo))) - 1;
  e_lo = std::max(e_lo, k2lo + 1 - k1hi);
  e_hi = std::min(e_hi, k2hi - k1lo - 1);
  Rational total = 0;
  for (std::int64_t e = e_lo; e <= e_hi; ++e) {
    std::int64_t cnt = std::min(k1hi, k2hi - e) - std::max(k1lo, k2lo - e);
    if (cnt <= 0) continue;
    Rational g = shifted_overlap(i1, i2, make_rational(e, q));
    if (g == 0) continue;
    total += g * Rational(static_cast<long>(cnt));
  }
  return total;
}

}  // namespace cfsim
