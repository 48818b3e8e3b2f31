#include "cfsim/cf_space.hpp"

#include <algorithm>
#include <tuple>

namespace cfsim {

namespace {

Rational rat(std::int64_t v) { return make_rational(v); }

// R g for a product-shaped R.
Rect rect_right(const Rect& r, const GroupElement& g) {
  Rect out;
  out.ilo = r.ilo + g.x;
  out.ihi = r.ihi + g.x;
  for (int e = 0; e < 2; ++e) {
    const Rational shift = e == 0 ? g.a : Rational(-g.a);
    out.real[e ^ g.eps] = r.real[e].empty() ? Interval{0, 0} : Interval{r.real[e].lo + shift, r.real[e].hi + shift};
  }
  return out;
}

Hull rect_hull(const Rect& r) {
  Hull h;
  for (int e = 0; e < 2; ++e) {
    if (r.real[e].empty() || r.ihi <= r.ilo) continue;
    h.level[e] = {true, r.ilo + 1, r.ihi, r.real[e].lo, r.real[e].hi};
  }
  return h;
}

std::int64_t ceil_div(const Rational& num, std::int64_t den) { return to_int64(ceil_of(num / rat(den))); }
std::int64_t floor_div(const Rational& num, std::int64_t den) { return to_int64(floor_of(num / rat(den))); }

void require_cylinder_level(const MeasureContext& ctx, int n) {
  if (n < 0 || n > ctx.depth())
    throw std::out_of_range("cylinder level " + std::to_string(n) + " beyond depth " + std::to_string(ctx.depth()));
}

}  // namespace

bool operator==(const PointExpansion& x, const PointExpansion& y) {
  return x.level == y.level && x.f == y.f && x.digits == y.digits;
}

bool operator<(const PointExpansion& x, const PointExpansion& y) {
  if (x.level != y.level) return x.level < y.level;
  if (x.f != y.f) return x.f < y.f;
  return x.digits < y.digits;
}

// ------------------------------------------------------------------ context

MeasureContext::MeasureContext(TowerParams params, std::vector<SpacerMap> maps)
    : params_(std::move(params)), maps_(std::move(maps)) {
  if (maps_.size() > static_cast<std::size_t>(params_.depth()))
    throw std::invalid_argument("more spacer maps than tower levels");
  const int N = depth();
  for (int n = 0; n < N; ++n) {
    if (maps_[n].level() != n) throw std::invalid_argument("spacer maps must be ordered by level from 0");
    if (maps_[n].radius() != params_.r[n] || maps_[n].atilde() != params_.atilde[n])
      throw std::invalid_argument("spacer map does not belong to these parameters");
  }
  std::vector<Rational> mass;
  Integer spacer_product = 1;
  for (int n = 0; n <= N; ++n) {
    if (n > 0) spacer_product *= static_cast<unsigned long>(maps_[n - 1].grid_size());
    mass.push_back(params_.F(n).measure() / Rational(spacer_product));
  }
  for (int n = 0; n <= N; ++n) weights_.push_back(mass[n] / mass[N]);
  for (int n = 0; n < N; ++n) {
    spacers_.push_back(maps_[n].spacer_set());
    Hull h;
    const Rect F = params_.F(n);
    for (const auto& c : spacers_.back()) h.absorb(rect_hull(rect_right(F, c)));
    hulls_.push_back(h);
  }
}

MeasureContext make_context(const TowerParams& p, std::uint64_t seed) {
  std::vector<SpacerMap> maps;
  for (int n = 0; n < p.depth(); ++n) maps.push_back(sample_spacer_map(p, n, seed));
  return MeasureContext(p, std::move(maps));
}

// ------------------------------------------------------------------ points

void validate_point(const MeasureContext& ctx, const PointExpansion& x) {
  if (x.level < 0 || x.reach() > ctx.depth()) throw std::invalid_argument("point expansion deeper than the tower");
  if (!ctx.params().F(x.level).contains(x.f)) throw std::invalid_argument("f_n must lie in F_n");
  for (std::size_t k = 0; k < x.digits.size(); ++k)
    if (!ctx.map(x.level + static_cast<int>(k)).in_grid(x.digits[k]))
      throw std::invalid_argument("digit outside H_" + std::to_string(x.level + k));
}

PointExpansion embed_point(const MeasureContext& ctx, const PointExpansion& x) {
  if (x.digits.empty())
    throw NeedsDeeperTail("no digit left to embed x from level " + std::to_string(x.level), x.level + 1);
  PointExpansion y;
  y.level = x.level + 1;
  y.f = x.f * ctx.map(x.level).c(x.digits.front());
  y.digits.assign(x.digits.begin() + 1, x.digits.end());
  return y;
}

PointExpansion normalize(const MeasureContext& ctx, const PointExpansion& x, int level) {
  if (level < x.level) throw std::invalid_argument("cannot normalise a point to a lower level");
  PointExpansion y = x;
  while (y.level < level) y = embed_point(ctx, y);
  return y;
}

bool same_point(const MeasureContext& ctx, const PointExpansion& x, const PointExpansion& y) {
  if (x.reach() != y.reach()) return false;
  const int level = std::max(x.level, y.level);
  return normalize(ctx, x, level) == normalize(ctx, y, level);
}

bool promotion_criterion(const MeasureContext& ctx, const GroupElement& g, int n) {
  if (n < 0 || n >= ctx.depth()) return false;
  return within(translate(g, ctx.image_hull(n), Side::left), ctx.params().F(n + 1));
}

PointExpansion act(const MeasureContext& ctx, const GroupElement& g, const PointExpansion& x) {
  PointExpansion y = x;
  for (;;) {
    GroupElement gf = g * y.f;
    if (ctx.params().F(y.level).contains(gf)) {
      y.f = std::move(gf);
      return y;
    }
    if (y.digits.empty()) {
      int needed = y.level + 1;
      while (needed < ctx.depth() && !promotion_criterion(ctx, g, needed - 1)) ++needed;
      throw NeedsDeeperTail("T_g needs digits beyond level " + std::to_string(y.level), needed);
    }
    y = embed_point(ctx, y);
  }
}

PointExpansion involution_apply(const MeasureContext& ctx, const Rational& b, const PointExpansion& x) {
  return act(ctx, GroupElement(0, b, 1), x);
}

PointExpansion factor_key(const MeasureContext& ctx, const Rational& b, const PointExpansion& x) {
  const PointExpansion sx = involution_apply(ctx, b, x);
  const int level = std::max(x.level, sx.level);
  PointExpansion u = normalize(ctx, x, level);
  PointExpansion v = normalize(ctx, sx, level);
  return v < u ? v : u;
}

PointExpansion sample_point(const MeasureContext& ctx, int level, Rng& rng, bool conditioned) {
  if (level < 0 || level > ctx.depth()) throw std::out_of_range("sample level beyond depth");
  const std::int64_t a = ctx.params().a[level];
  constexpr std::uint64_t steps = std::uint64_t{1} << 20;
  PointExpansion x;
  x.level = level;
  const std::int64_t xi = rng.between(-a + 1, a);
  const std::uint64_t k = 1 + rng.below(steps);
  Rational real = rat(-a) + rat(2 * a) * Rational(Integer(static_cast<unsigned long>(k)), Integer(static_cast<unsigned long>(steps)));
  real.canonicalize();
  const int eps = rng.coin() ? 1 : 0;
  x.f = GroupElement(xi, real, eps);
  for (int n = level; n < ctx.depth(); ++n) {
    std::int64_t r = ctx.params().r[n];
    if (conditioned && n >= 1) {
      // floor((1 - 1/n^2) r)
      const std::int64_t q = static_cast<std::int64_t>(n) * n;
      r = to_int64(floor_of(make_rational(r * (q - 1), q)));
    }
    x.digits.push_back({rng.between(-r, r), rng.between(-r, r)});
  }
  return x;
}

std::optional<std::pair<GroupElement, GridPoint>> pull_back(const MeasureContext& ctx, const GroupElement& f, int n) {
  if (n < 1 || n > ctx.depth()) throw std::out_of_range("pull back level out of range");
  const SpacerMap& m = ctx.map(n - 1);
  const std::int64_t t = m.atilde();
  GridPoint h;
  h.i = ceil_div(rat(f.x - t), 2 * t);
  const std::int64_t j = ceil_div(f.a - rat(t), 2 * t);
  h.j = f.eps == 0 ? j : -j;
  if (!m.in_grid(h)) return std::nullopt;
  const GroupElement fp = f * invert(m.c(h));
  if (!ctx.params().F(n - 1).contains(fp)) return std::nullopt;
  return std::make_pair(fp, h);
}

bool in_cylinder(const MeasureContext& ctx, const PointExpansion& x, const Cylinder& c) {
  if (x.level <= c.level) return c.set.contains(normalize(ctx, x, c.level).f);
  GroupElement f = x.f;
  for (int n = x.level; n > c.level; --n) {
    auto pb = pull_back(ctx, f, n);
    if (!pb) return false;
    f = pb->first;
  }
  return c.set.contains(f);
}

// ------------------------------------------------------------------ cylinders

void validate_cylinder(const MeasureContext& ctx, const Cylinder& c) {
  require_cylinder_level(ctx, c.level);
  if (!c.set.within(ctx.params().F(c.level))) throw std::invalid_argument("cylinder base must lie in F_n");
}

Rational cylinder_measure(const MeasureContext& ctx, const Cylinder& c) {
  require_cylinder_level(ctx, c.level);
  return ctx.weight(c.level) * c.set.measure() / ctx.params().F(c.level).measure();
}

Cylinder refine_cylinder(const MeasureContext& ctx, const Cylinder& c, int to_level) {
  require_cylinder_level(ctx, c.level);
  require_cylinder_level(ctx, to_level);
  if (to_level < c.level) throw std::invalid_argument("refinement goes to a deeper level");
  Cylinder out = c;
  while (out.level < to_level) {
    out.set = spread(out.set, ctx.spacers(out.level), Side::right).set;
    ++out.level;
  }
  return out;
}

Rational refined_overlap(const MeasureContext& ctx, const BoxSet& y, int hi, const BoxSet& z, int lo) {
  if (lo > hi) throw std::invalid_argument("refined_overlap needs lo <= hi");
  if (y.empty() || z.empty()) return 0;
  if (hi == lo) return combine(y, z, SetOp::intersect).measure();

  const int n = hi - 1;
  const SpacerMap& m = ctx.map(n);
  const std::int64_t t = m.atilde(), r = m.radius();
  const Rect Fn = ctx.params().F(n);
  const Hull hull = y.hull();

  std::int64_t i_lo = INT64_MAX, i_hi = INT64_MIN, j_lo = INT64_MAX, j_hi = INT64_MIN;
  for (int e = 0; e < 2; ++e) {
    const LevelHull& l = hull.level[e];
    if (!l.nonempty) continue;
    i_lo = std::min(i_lo, ceil_div(rat(l.imin - t), 2 * t));
    i_hi = std::max(i_hi, ceil_div(rat(l.imax - t), 2 * t));
    std::int64_t a = floor_div(l.lo - rat(t), 2 * t), b = ceil_div(l.hi - rat(t), 2 * t);
    if (e == 1) std::tie(a, b) = std::make_pair(-b, -a);
    j_lo = std::min(j_lo, a);
    j_hi = std::max(j_hi, b);
  }
  i_lo = std::max(i_lo, -r);
  i_hi = std::min(i_hi, r);
  j_lo = std::max(j_lo, -r);
  j_hi = std::min(j_hi, r);

  Rational total = 0;
  for (std::int64_t i = i_lo; i <= i_hi; ++i) {
    for (std::int64_t j = j_lo; j <= j_hi; ++j) {
      const GroupElement c = m.c({i, j});
      const BoxSet piece = intersect(y, rect_right(Fn, c));
      if (piece.empty()) continue;
      total += refined_overlap(ctx, translate(invert(c), piece, Side::right), n, z, lo);
    }
  }
  return total;
}

Rational cylinder_overlap(const MeasureContext& ctx, const Cylinder& a, const Cylinder& b) {
  validate_cylinder(ctx, a);
  validate_cylinder(ctx, b);
  const Cylinder& hi = a.level >= b.level ? a : b;
  const Cylinder& lo = a.level >= b.level ? b : a;
  return ctx.weight(hi.level) * refined_overlap(ctx, hi.set, hi.level, lo.set, lo.level) /
         ctx.params().F(hi.level).measure();
}

IntersectResult intersect_measure(const MeasureContext& ctx, const GroupElement& g, const Cylinder& a,
                                  const Cylinder& b) {
  validate_cylinder(ctx, a);
  validate_cylinder(ctx, b);
  IntersectResult res;
  res.value = 0;
  res.unreachable = 0;
  res.deepest = a.level;
  const GroupElement ginv = invert(g);
  BoxSet pending = a.set;
  for (int k = a.level; !pending.empty(); ++k) {
    res.deepest = k;
    const Rect Fk = ctx.params().F(k);
    const BoxSet moved = translate(g, pending, Side::left);
    const BoxSet inside = intersect(moved, Fk);
    if (!inside.empty()) res.value += cylinder_overlap(ctx, Cylinder{k, inside}, b);
    const BoxSet outside = combine(moved, inside, SetOp::subtract);
    if (outside.empty()) break;
    pending = translate(ginv, outside, Side::left);
    if (k == ctx.depth()) {
      res.unreachable = cylinder_measure(ctx, Cylinder{k, pending});
      break;
    }
    pending = spread(pending, ctx.spacers(k), Side::right).set;
  }
  if (res.unreachable != 0 && cylinder_measure(ctx, b) == 1) {
    res.value += res.unreachable;
    res.unreachable = 0;
  }
  return res;
}

}  // namespace cfsim
