#include "cfsim/boxset.hpp"
#include "cfsim/rng.hpp"
#include "doctest.h"

using namespace cfsim;

// Oracle: every box endpoint used here lies on a 1/kDen grid, so a set is
// determined by which cells (i, eps, [k/kDen, (k+1)/kDen)) it covers, tested
// at the cell midpoints.

namespace {

constexpr std::int64_t kDen = 6;
constexpr std::int64_t kSpan = 4;

Rational q(std::int64_t p, std::int64_t d = 1) { return make_rational(p, d); }

BoxSet random_set(Rng& rng) {
  std::vector<Box> boxes;
  const int count = 1 + static_cast<int>(rng.below(4));
  for (int k = 0; k < count; ++k) {
    std::int64_t lo = rng.between(-kSpan * kDen, kSpan * kDen - 1);
    std::int64_t hi = std::min(kSpan * kDen, lo + 1 + static_cast<std::int64_t>(rng.below(3 * kDen)));
    boxes.push_back({rng.between(-2, 2), Interval{q(lo, kDen), q(hi, kDen)}, static_cast<std::uint8_t>(rng.coin())});
  }
  return BoxSet::from_boxes(std::move(boxes));
}

struct Cell {
  std::int64_t i, k;
  int eps;
  GroupElement mid() const { return GroupElement(i, q(2 * k + 1, 2 * kDen), eps); }
};

std::vector<Cell> cells(std::int64_t ispan, std::int64_t rspan) {
  std::vector<Cell> out;
  for (std::int64_t i = -ispan; i <= ispan; ++i)
    for (std::int64_t k = -rspan * kDen; k < rspan * kDen; ++k)
      for (int e = 0; e < 2; ++e) out.push_back({i, k, e});
  return out;
}

Rational raster_measure(const BoxSet& s, std::int64_t ispan, std::int64_t rspan) {
  std::int64_t n = 0;
  for (const auto& c : cells(ispan, rspan)) n += s.contains(c.mid());
  return q(n, kDen);
}

}  // namespace

TEST_CASE("normal form and measure") {
  BoxSet s = BoxSet::from_boxes({{0, {q(0), q(1)}, 0}, {0, {q(1, 2), q(2)}, 0}, {0, {q(3), q(3)}, 0}});
  CHECK(s.size() == 1);
  CHECK(s.measure() == 2);
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    BoxSet a = random_set(rng);
    CHECK(a.measure() == raster_measure(a, 3, kSpan + 1));
  }
}

TEST_CASE("boolean operations against rasterisation") {
  Rng rng(5);
  for (int t = 0; t < 40; ++t) {
    BoxSet a = random_set(rng), b = random_set(rng);
    BoxSet u = combine(a, b, SetOp::unite), x = combine(a, b, SetOp::intersect);
    BoxSet d = combine(a, b, SetOp::subtract), s = combine(a, b, SetOp::symdiff);
    for (const auto& c : cells(3, kSpan + 1)) {
      const bool ia = a.contains(c.mid()), ib = b.contains(c.mid());
      CHECK(u.contains(c.mid()) == (ia || ib));
      CHECK(x.contains(c.mid()) == (ia && ib));
      CHECK(d.contains(c.mid()) == (ia && !ib));
      CHECK(s.contains(c.mid()) == (ia != ib));
    }
    CHECK(u.measure() + x.measure() == a.measure() + b.measure());
    CHECK(is_subset_mod_null(x, a));
  }
}

TEST_CASE("translations against pointwise definition") {
  Rng rng(6);
  for (int t = 0; t < 30; ++t) {
    BoxSet a = random_set(rng);
    GroupElement g(rng.between(-2, 2), q(rng.between(-12, 12), kDen), rng.coin());
    BoxSet l = translate(g, a, Side::left), r = translate(g, a, Side::right);
    CHECK(l.measure() == a.measure());
    CHECK(r.measure() == a.measure());
    for (const auto& c : cells(5, kSpan + 3)) {
      CHECK(l.contains(c.mid()) == a.contains(invert(g) * c.mid()));
      CHECK(r.contains(c.mid()) == a.contains(c.mid() * invert(g)));
    }
    BoxSet inv = invert_set(a);
    for (const auto& c : cells(3, kSpan + 1)) CHECK(inv.contains(c.mid()) == a.contains(invert(c.mid())));
  }
}

TEST_CASE("rects") {
  Rect f = Rect::centered(3);
  CHECK(f.measure() == 6 * 6 * 2);
  CHECK(f.contains(GroupElement(3, q(3), 1)));
  CHECK_FALSE(f.contains(GroupElement(-3, q(0), 0)));
  CHECK_FALSE(f.contains(GroupElement(0, q(-3), 0)));
  CHECK(f.to_boxset().measure() == f.measure());
  CHECK(f.level_only(1).measure() == 36);
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    BoxSet a = random_set(rng);
    CHECK(intersect(a, f).measure() == combine(a, f.to_boxset(), SetOp::intersect).measure());
    CHECK(a.within(Rect::centered(kSpan + 3)));
  }
}

TEST_CASE("spread and products") {
  BoxSet a = BoxSet::single(0, q(0), q(1), 0);
  std::vector<GroupElement> shifts{GroupElement(0, q(0), 0), GroupElement(0, q(1), 0), GroupElement(1, q(0), 1)};
  SpreadResult r = spread(a, shifts, Side::right);
  CHECK(r.disjoint);
  CHECK(r.set.measure() == 3);
  shifts.push_back(GroupElement(0, q(1, 2), 0));
  CHECK_FALSE(spread(a, shifts, Side::right).disjoint);

  Rect s = Rect::centered(1, q(1, 2)), t = Rect::centered(2);
  BoxSet brute = product(s.to_boxset(), t.to_boxset());
  CHECK(product(s, t).to_boxset() == brute);
}
