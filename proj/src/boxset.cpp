#include "cfsim/boxset.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

namespace cfsim {

bool operator==(const Interval& u, const Interval& v) { return u.lo == v.lo && u.hi == v.hi; }

Rational overlap_length(const Interval& u, const Interval& v) {
  const Rational& lo = u.lo < v.lo ? v.lo : u.lo;
  const Rational& hi = u.hi < v.hi ? u.hi : v.hi;
  if (lo < hi) return hi - lo;
  return 0;
}

Interval intersect(const Interval& u, const Interval& v) {
  return {u.lo < v.lo ? v.lo : u.lo, u.hi < v.hi ? u.hi : v.hi};
}

Interval signed_image(const Interval& u, int sigma) {
  if (sigma >= 0) return u;
  return {Rational(-u.hi), Rational(-u.lo)};
}

bool operator==(const Box& u, const Box& v) { return u.i == v.i && u.eps == v.eps && u.span == v.span; }

// ---------------------------------------------------------------- Rect

Rect Rect::centered(std::int64_t half) { return centered(half, Rational(static_cast<long>(half))); }

Rect Rect::centered(std::int64_t int_half, const Rational& real_half) {
  Rect r;
  r.ilo = -int_half;
  r.ihi = int_half;
  Interval iv{Rational(-real_half), real_half};
  r.real = {iv, iv};
  return r;
}

Rational Rect::measure() const {
  Rational count(static_cast<long>(int_count()));
  return count * (real[0].length() + real[1].length());
}

bool Rect::contains(const GroupElement& g) const {
  return g.x > ilo && g.x <= ihi && real[g.eps].contains(g.a);
}

BoxSet Rect::to_boxset() const {
  std::vector<Box> out;
  for (int e = 0; e < 2; ++e) {
    if (real[e].empty()) continue;
    for (std::int64_t i = ilo + 1; i <= ihi; ++i) out.push_back({i, real[e], static_cast<std::uint8_t>(e)});
  }
  return BoxSet::from_boxes(std::move(out));
}

Rect Rect::level_only(int eps) const {
  Rect r = *this;
  r.real[1 - eps] = Interval{0, 0};
  return r;
}

// ---------------------------------------------------------------- Hull

void Hull::absorb(const Hull& other) {
  for (int e = 0; e < 2; ++e) {
    const LevelHull& o = other.level[e];
    if (!o.nonempty) continue;
    LevelHull& m = level[e];
    if (!m.nonempty) {
      m = o;
      continue;
    }
    m.imin = std::min(m.imin, o.imin);
    m.imax = std::max(m.imax, o.imax);
    if (o.lo < m.lo) m.lo = o.lo;
    if (m.hi < o.hi) m.hi = o.hi;
  }
}

Hull translate(const GroupElement& g, const Hull& h, Side side) {
  Hull out;
  for (int e = 0; e < 2; ++e) {
    const LevelHull& src = h.level[e];
    if (!src.nonempty) continue;
    LevelHull dst;
    dst.nonempty = true;
    dst.imin = src.imin + g.x;
    dst.imax = src.imax + g.x;
    if (side == Side::left) {
      if (g.eps == 0) {
        dst.lo = g.a + src.lo;
        dst.hi = g.a + src.hi;
      } else {
        dst.lo = g.a - src.hi;
        dst.hi = g.a - src.lo;
      }
    } else {
      const Rational shift = e == 0 ? g.a : Rational(-g.a);
      dst.lo = src.lo + shift;
      dst.hi = src.hi + shift;
    }
    out.level[e ^ g.eps] = std::move(dst);
  }
  return out;
}

bool within(const Hull& h, const Rect& r) {
  for (int e = 0; e < 2; ++e) {
    const LevelHull& l = h.level[e];
    if (!l.nonempty) continue;
    if (r.real[e].empty()) return false;
    if (l.imin <= r.ilo || l.imax > r.ihi) return false;
    if (l.lo < r.real[e].lo || r.real[e].hi < l.hi) return false;
  }
  return true;
}

Rect product(const Rect& a, const Rect& b) {
  Rect r;
  r.ilo = a.ilo + b.ilo + 1;
  r.ihi = a.ihi + b.ihi;
  for (int out = 0; out < 2; ++out) {
    std::vector<Interval> pieces;
    for (int ea = 0; ea < 2; ++ea) {
      int eb = out ^ ea;
      if (a.real[ea].empty() || b.real[eb].empty()) continue;
      Interval bi = signed_image(b.real[eb], ea == 0 ? 1 : -1);
      pieces.push_back({a.real[ea].lo + bi.lo, a.real[ea].hi + bi.hi});
    }
    if (pieces.empty()) {
      r.real[out] = {0, 0};
    } else if (pieces.size() == 1) {
      r.real[out] = pieces[0];
    } else {
      auto& p = pieces[0];
      auto& q = pieces[1];
      if (p.hi < q.lo || q.hi < p.lo) throw std::domain_error("product of rects is not a rect");
      r.real[out] = {p.lo < q.lo ? p.lo : q.lo, p.hi < q.hi ? q.hi : p.hi};
    }
  }
  return r;
}

// ---------------------------------------------------------------- BoxSet

namespace {

bool column_less(const Box& u, const Box& v) {
  if (u.eps != v.eps) return u.eps < v.eps;
  return u.i < v.i;
}

bool same_column(const Box& u, const Box& v) { return u.eps == v.eps && u.i == v.i; }

bool canonical_less(const Box& u, const Box& v) {
  if (u.eps != v.eps) return u.eps < v.eps;
  if (u.i != v.i) return u.i < v.i;
  return u.span.lo < v.span.lo;
}

std::vector<Interval> sweep(const std::vector<Interval>& a, const std::vector<Interval>& b, SetOp op) {
  std::vector<Rational> pts;
  pts.reserve(2 * (a.size() + b.size()));
  for (const auto& iv : a) {
    pts.push_back(iv.lo);
    pts.push_back(iv.hi);
  }
  for (const auto& iv : b) {
    pts.push_back(iv.lo);
    pts.push_back(iv.hi);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  std::vector<Interval> out;
  std::size_t ia = 0, ib = 0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const Rational& lo = pts[k];
    const Rational& hi = pts[k + 1];
    while (ia < a.size() && a[ia].hi <= lo) ++ia;
    while (ib < b.size() && b[ib].hi <= lo) ++ib;
    bool in_a = ia < a.size() && a[ia].lo <= lo;
    bool in_b = ib < b.size() && b[ib].lo <= lo;
    bool keep = false;
    switch (op) {
      case SetOp::intersect: keep = in_a && in_b; break;
      case SetOp::unite: keep = in_a || in_b; break;
      case SetOp::subtract: keep = in_a && !in_b; break;
      case SetOp::symdiff: keep = in_a != in_b; break;
    }
    if (!keep) continue;
    if (!out.empty() && out.back().hi == lo)
      out.back().hi = hi;
    else
      out.push_back({lo, hi});
  }
  return out;
}

}  // namespace

BoxSet BoxSet::from_boxes(std::vector<Box> boxes) {
  std::erase_if(boxes, [](const Box& b) { return b.span.empty(); });
  std::sort(boxes.begin(), boxes.end(), canonical_less);
  std::vector<Box> out;
  out.reserve(boxes.size());
  for (auto& b : boxes) {
    if (!out.empty() && same_column(out.back(), b) && !(out.back().span.hi < b.span.lo)) {
      if (out.back().span.hi < b.span.hi) out.back().span.hi = b.span.hi;
    } else {
      out.push_back(std::move(b));
    }
  }
  return BoxSet(std::move(out));
}

BoxSet BoxSet::single(std::int64_t i, Rational lo, Rational hi, int eps) {
  return from_boxes({Box{i, Interval{std::move(lo), std::move(hi)}, static_cast<std::uint8_t>(eps)}});
}

Rational BoxSet::measure() const {
  Rational m = 0;
  for (const auto& b : boxes_) m += b.span.hi - b.span.lo;
  return m;
}

Rational BoxSet::measure_level(int eps) const {
  Rational m = 0;
  for (const auto& b : boxes_)
    if (b.eps == eps) m += b.span.hi - b.span.lo;
  return m;
}

BoxSet BoxSet::level(int eps) const {
  std::vector<Box> out;
  for (const auto& b : boxes_)
    if (b.eps == eps) out.push_back(b);
  return BoxSet(std::move(out));
}

Hull BoxSet::hull() const {
  Hull h;
  for (const auto& b : boxes_) {
    LevelHull& l = h.level[b.eps];
    if (!l.nonempty) {
      l.nonempty = true;
      l.imin = l.imax = b.i;
      l.lo = b.span.lo;
      l.hi = b.span.hi;
      continue;
    }
    l.imin = std::min(l.imin, b.i);
    l.imax = std::max(l.imax, b.i);
    if (b.span.lo < l.lo) l.lo = b.span.lo;
    if (l.hi < b.span.hi) l.hi = b.span.hi;
  }
  return h;
}

bool BoxSet::within(const Rect& r) const { return cfsim::within(hull(), r); }

bool BoxSet::contains(const GroupElement& g) const {
  // first box in column (g.eps, g.x) whose hi >= g.a
  auto it = std::lower_bound(boxes_.begin(), boxes_.end(), g, [](const Box& b, const GroupElement& p) {
    if (b.eps != p.eps) return b.eps < p.eps;
    if (b.i != p.x) return b.i < p.x;
    return b.span.hi < p.a;
  });
  return it != boxes_.end() && it->eps == g.eps && it->i == g.x && it->span.contains(g.a);
}

std::ostream& operator<<(std::ostream& os, const BoxSet& s) {
  os << '{';
  bool first = true;
  for (const auto& b : s.boxes()) {
    if (!first) os << ", ";
    first = false;
    os << '{' << b.i << "}x(" << to_exact_string(b.span.lo) << ',' << to_exact_string(b.span.hi) << "]x{"
       << int(b.eps) << '}';
  }
  return os << '}';
}

BoxSet translate(const GroupElement& g, const BoxSet& s, Side side) {
  std::vector<Box> out;
  out.reserve(s.size());
  for (const auto& b : s.boxes()) {
    Box t;
    t.i = b.i + g.x;
    t.eps = b.eps ^ g.eps;
    if (side == Side::left) {
      if (g.eps == 0)
        t.span = {g.a + b.span.lo, g.a + b.span.hi};
      else
        t.span = {g.a - b.span.hi, g.a - b.span.lo};
    } else {
      if (b.eps == 0)
        t.span = {b.span.lo + g.a, b.span.hi + g.a};
      else
        t.span = {b.span.lo - g.a, b.span.hi - g.a};
    }
    out.push_back(std::move(t));
  }
  return BoxSet::from_boxes(std::move(out));
}

BoxSet combine(const BoxSet& a, const BoxSet& b, SetOp op) {
  const auto& A = a.boxes();
  const auto& B = b.boxes();
  std::vector<Box> out;
  std::size_t ia = 0, ib = 0;
  std::vector<Interval> ca, cb;
  while (ia < A.size() || ib < B.size()) {
    // next column key
    const Box* key;
    if (ia == A.size())
      key = &B[ib];
    else if (ib == B.size())
      key = &A[ia];
    else
      key = column_less(B[ib], A[ia]) ? &B[ib] : &A[ia];
    const std::int64_t ki = key->i;
    const std::uint8_t ke = key->eps;
    ca.clear();
    cb.clear();
    while (ia < A.size() && A[ia].i == ki && A[ia].eps == ke) ca.push_back(A[ia++].span);
    while (ib < B.size() && B[ib].i == ki && B[ib].eps == ke) cb.push_back(B[ib++].span);
    std::vector<Interval> res;
    if (cb.empty()) {
      if (op != SetOp::intersect) res = ca;
    } else if (ca.empty()) {
      if (op == SetOp::unite || op == SetOp::symdiff) res = cb;
    } else {
      res = sweep(ca, cb, op);
    }
    for (auto& iv : res) out.push_back({ki, std::move(iv), ke});
  }
  return BoxSet(std::move(out));
}

BoxSet intersect(const BoxSet& s, const Rect& r) {
  std::vector<Box> out;
  for (const auto& b : s.boxes()) {
    if (b.i <= r.ilo || b.i > r.ihi) continue;
    Interval iv = intersect(b.span, r.real[b.eps]);
    if (iv.empty()) continue;
    out.push_back({b.i, std::move(iv), b.eps});
  }
  return BoxSet(std::move(out));
}

bool is_subset_mod_null(const BoxSet& a, const BoxSet& b) { return combine(a, b, SetOp::subtract).empty(); }

BoxSet invert_set(const BoxSet& s) {
  std::vector<Box> out;
  out.reserve(s.size());
  for (const auto& b : s.boxes()) {
    if (b.eps == 0)
      out.push_back({-b.i, Interval{Rational(-b.span.hi), Rational(-b.span.lo)}, 0});
    else
      out.push_back({-b.i, b.span, 1});
  }
  return BoxSet::from_boxes(std::move(out));
}

SpreadResult spread(const BoxSet& s, std::span<const GroupElement> elems, Side side) {
  std::vector<Box> all;
  all.reserve(s.size() * elems.size());
  for (const auto& e : elems) {
    BoxSet t = translate(e, s, side);
    for (const auto& b : t.boxes()) all.push_back(b);
  }
  SpreadResult r;
  r.set = BoxSet::from_boxes(std::move(all));
  Rational expected = s.measure() * Rational(static_cast<long>(elems.size()));
  r.disjoint = r.set.measure() == expected;
  return r;
}

BoxSet product(const BoxSet& a, const BoxSet& b) {
  std::vector<Box> out;
  out.reserve(a.size() * b.size());
  for (const auto& u : a.boxes()) {
    for (const auto& v : b.boxes()) {
      Interval vi = signed_image(v.span, u.eps == 0 ? 1 : -1);
      out.push_back({u.i + v.i, Interval{u.span.lo + vi.lo, u.span.hi + vi.hi},
                     static_cast<std::uint8_t>(u.eps ^ v.eps)});
    }
  }
  return BoxSet::from_boxes(std::move(out));
}

}  // namespace cfsim
