#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "cfsim/group.hpp"
#include "cfsim/rational.hpp"

namespace cfsim {

// Half-open real interval (lo, hi]. Empty when lo >= hi.
struct Interval {
  Rational lo;
  Rational hi;

  bool empty() const { return !(lo < hi); }
  Rational length() const { return empty() ? Rational(0) : Rational(hi - lo); }
  bool contains(const Rational& t) const { return lo < t && t <= hi; }
};

bool operator==(const Interval& u, const Interval& v);
Rational overlap_length(const Interval& u, const Interval& v);
Interval intersect(const Interval& u, const Interval& v);
// sigma * (lo, hi] for sigma = +-1, renormalised to a half-open interval.
Interval signed_image(const Interval& u, int sigma);

// {i} x (lo, hi] x {eps}
struct Box {
  std::int64_t i = 0;
  Interval span;
  std::uint8_t eps = 0;

  Rational length() const { return span.length(); }
};

bool operator==(const Box& u, const Box& v);

class BoxSet;

// Product-shaped subset of G: integers in (ilo, ihi], and on each level eps a
// real interval real[eps]. F_n, S_n, F~_n and the windows F~_n phi_n(h) are all
// of this shape.
struct Rect {
  std::int64_t ilo = 0;
  std::int64_t ihi = 0;
  std::array<Interval, 2> real;

  // (-half, half]_Z x (-half, half]_R x Z_2
  static Rect centered(std::int64_t half);
  static Rect centered(std::int64_t int_half, const Rational& real_half);

  bool empty() const { return ihi <= ilo || (real[0].empty() && real[1].empty()); }
  std::int64_t int_count() const { return ihi > ilo ? ihi - ilo : 0; }
  Rational measure() const;
  bool contains(const GroupElement& g) const;
  BoxSet to_boxset() const;
  Rect level_only(int eps) const;
};

// Per-level bounding data of a box set: integer range [imin, imax] and the
// closure [lo, hi] of the union of real intervals.
struct LevelHull {
  bool nonempty = false;
  std::int64_t imin = 0;
  std::int64_t imax = 0;
  Rational lo;
  Rational hi;
};

struct Hull {
  std::array<LevelHull, 2> level;

  void absorb(const Hull& other);
  bool empty() const { return !level[0].nonempty && !level[1].nonempty; }
};

enum class Side { left, right };
enum class SetOp { intersect, unite, subtract, symdiff };

// Finite union of boxes in canonical form: sorted by (eps, i, lo), pairwise
// disjoint, with touching intervals in the same column merged. Two BoxSets
// are equal iff they represent the same set modulo Haar-null sets.
class BoxSet {
 public:
  BoxSet() = default;

  // Union of arbitrary (possibly overlapping, possibly empty) boxes.
  static BoxSet from_boxes(std::vector<Box> boxes);
  static BoxSet single(std::int64_t i, Rational lo, Rational hi, int eps);

  const std::vector<Box>& boxes() const { return boxes_; }
  std::size_t size() const { return boxes_.size(); }
  bool empty() const { return boxes_.empty(); }

  Rational measure() const;
  Rational measure_level(int eps) const;
  BoxSet level(int eps) const;
  Hull hull() const;
  bool within(const Rect& r) const;
  // Pointwise membership with half-open boxes.
  bool contains(const GroupElement& g) const;

  friend bool operator==(const BoxSet& u, const BoxSet& v) { return u.boxes_ == v.boxes_; }

 private:
  explicit BoxSet(std::vector<Box> canonical) : boxes_(std::move(canonical)) {}
  std::vector<Box> boxes_;

  friend BoxSet combine(const BoxSet&, const BoxSet&, SetOp);
  friend BoxSet intersect(const BoxSet&, const Rect&);
};

std::ostream& operator<<(std::ostream& os, const BoxSet& s);

inline Rational measure(const BoxSet& s) { return s.measure(); }

// gS (left) or Sg (right). Left multiplication by a level-1 element reflects
// the real coordinate; right multiplication never does.
BoxSet translate(const GroupElement& g, const BoxSet& s, Side side);

BoxSet combine(const BoxSet& a, const BoxSet& b, SetOp op);
BoxSet intersect(const BoxSet& s, const Rect& r);

bool is_subset_mod_null(const BoxSet& a, const BoxSet& b);

BoxSet invert_set(const BoxSet& s);

struct SpreadResult {
  BoxSet set;
  bool disjoint = true;  // copies pairwise disjoint modulo null sets
};

// Union of the translates e S (left) or S e (right) over e in elems.
SpreadResult spread(const BoxSet& s, std::span<const GroupElement> elems, Side side);

// Algebraic product AB = {ab}, modulo null sets. Cost |A| * |B|.
BoxSet product(const BoxSet& a, const BoxSet& b);

Hull translate(const GroupElement& g, const Hull& h, Side side);
bool within(const Hull& h, const Rect& r);

// Product of two rectangles (exact for product-shaped sets, mod null).
Rect product(const Rect& a, const Rect& b);

}  // namespace cfsim
