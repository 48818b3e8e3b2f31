#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>

#include "cfsim/rational.hpp"

namespace cfsim {

// Element (x, a, eps) of G = Z x (R semidirect Z_2) with law
//   (x,a,n)(y,b,m) = (x+y, a + (-1)^n b, n+m).
// The real coordinate is exact; eps is 0 or 1.
struct GroupElement {
  std::int64_t x = 0;
  Rational a = 0;
  std::uint8_t eps = 0;

  GroupElement() = default;
  GroupElement(std::int64_t x_, Rational a_, int eps_);

  static GroupElement identity() { return {}; }
  bool is_identity() const { return x == 0 && a == 0 && eps == 0; }
};

bool operator==(const GroupElement& g, const GroupElement& h);
inline bool operator!=(const GroupElement& g, const GroupElement& h) { return !(g == h); }
// Lexicographic on (x, a, eps); used for canonical keys and ordered containers.
bool operator<(const GroupElement& g, const GroupElement& h);
std::ostream& operator<<(std::ostream& os, const GroupElement& g);

GroupElement multiply(const GroupElement& g, const GroupElement& h);
GroupElement invert(const GroupElement& g);
inline GroupElement operator*(const GroupElement& g, const GroupElement& h) { return multiply(g, h); }

// phi_n(i,j) = (2 i atilde_n, 2 j atilde_n, 0). Central exactly when j == 0.
GroupElement phi(std::int64_t atilde, std::int64_t i, std::int64_t j);

inline int project_level(const GroupElement& g) { return g.eps; }

// True when g lies in the centre Z x {0} x {0}.
inline bool is_central(const GroupElement& g) { return g.a == 0 && g.eps == 0; }

// G_b = {(0,0,0), (0,b,1)}; the non-identity element is an involution.
struct CompactSubgroup {
  Rational b;
  GroupElement generator() const { return {0, b, 1}; }
  std::array<GroupElement, 2> elements() const { return {GroupElement::identity(), generator()}; }
};

// h = (0, (a+b)/2, 1), which satisfies h G_a h^{-1} = G_b.
GroupElement conjugate_witness(const Rational& a, const Rational& b);

// Convenience for Z^2 grid points (the index sets H_n, I_n).
struct GridPoint {
  std::int64_t i = 0;
  std::int64_t j = 0;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
  friend auto operator<=>(const GridPoint&, const GridPoint&) = default;
};

}  // namespace cfsim
