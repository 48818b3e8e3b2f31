#include "cfsim/group.hpp"

#include <ostream>
#include <stdexcept>

namespace cfsim {

namespace {

std::int64_t checked_add(std::int64_t u, std::int64_t v) {
  std::int64_t r;
  if (__builtin_add_overflow(u, v, &r)) throw std::overflow_error("integer coordinate overflow");
  return r;
}

}  // namespace

GroupElement::GroupElement(std::int64_t x_, Rational a_, int eps_) : x(x_), a(std::move(a_)) {
  if (eps_ != 0 && eps_ != 1) throw std::invalid_argument("level bit must be 0 or 1");
  eps = static_cast<std::uint8_t>(eps_);
}

bool operator==(const GroupElement& g, const GroupElement& h) {
  return g.x == h.x && g.eps == h.eps && g.a == h.a;
}

bool operator<(const GroupElement& g, const GroupElement& h) {
  if (g.x != h.x) return g.x < h.x;
  int c = cmp(g.a, h.a);
  if (c != 0) return c < 0;
  return g.eps < h.eps;
}

std::ostream& operator<<(std::ostream& os, const GroupElement& g) {
  return os << '(' << g.x << ", " << to_exact_string(g.a) << ", " << int(g.eps) << ')';
}

GroupElement multiply(const GroupElement& g, const GroupElement& h) {
  GroupElement r;
  r.x = checked_add(g.x, h.x);
  if (g.eps == 0)
    r.a = g.a + h.a;
  else
    r.a = g.a - h.a;
  r.eps = g.eps ^ h.eps;
  return r;
}

GroupElement invert(const GroupElement& g) {
  GroupElement r;
  if (g.x == INT64_MIN) throw std::overflow_error("integer coordinate overflow");
  r.x = -g.x;
  // (x,a,0)^{-1} = (-x,-a,0);  (x,a,1)^{-1} = (-x,a,1)
  r.a = g.eps == 0 ? Rational(-g.a) : g.a;
  r.eps = g.eps;
  return r;
}

GroupElement phi(std::int64_t atilde, std::int64_t i, std::int64_t j) {
  if (atilde < 1) throw std::invalid_argument("phi: atilde must be positive");
  std::int64_t two_at = 2 * atilde;
  std::int64_t xi, xj;
  if (__builtin_mul_overflow(two_at, i, &xi) || __builtin_mul_overflow(two_at, j, &xj))
    throw std::overflow_error("phi: overflow");
  return {xi, Rational(static_cast<long>(xj)), 0};
}

GroupElement conjugate_witness(const Rational& a, const Rational& b) {
  Rational mid = (a + b) / 2;
  return {0, mid, 1};
}

}  // namespace cfsim
