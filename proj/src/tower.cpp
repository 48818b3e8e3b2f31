#include "cfsim/tower.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "cfsim/correlation.hpp"

namespace cfsim {

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("tower parameters overflow int64");
  return r;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("tower parameters overflow int64");
  return r;
}

Rational rat(std::int64_t v) { return make_rational(v); }

void require_level(const TowerParams& p, int n, int max_level) {
  if (n < 0 || n > max_level)
    throw std::out_of_range("level " + std::to_string(n) + " outside 0.." + std::to_string(max_level) +
                            " for depth " + std::to_string(p.depth()));
}

std::vector<GroupElement> phi_images(std::int64_t atilde, std::int64_t radius, GridPoint centre) {
  std::vector<GroupElement> out;
  out.reserve(static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1)));
  for (std::int64_t i = -radius; i <= radius; ++i)
    for (std::int64_t j = -radius; j <= radius; ++j) out.push_back(phi(atilde, centre.i + i, centre.j + j));
  return out;
}

}  // namespace

// ------------------------------------------------------------------ params

Rect TowerParams::S(int n) const { return Rect::centered(b.at(n)); }

std::vector<Rational> TowerParams::growth_diagnostics() const {
  std::vector<Rational> out;
  for (int n = 0; n < depth(); ++n) {
    Integer n4 = Integer(n) * n * n * n;
    out.push_back(make_rational(n4, Integer(static_cast<long>(r[n]))));
  }
  return out;
}

TowerParams build_params(std::span<const std::int64_t> r_seq) {
  if (r_seq.empty()) throw std::invalid_argument("r sequence is empty");
  for (std::size_t k = 0; k < r_seq.size(); ++k) {
    if (r_seq[k] <= 0) throw std::invalid_argument("r_" + std::to_string(k) + " must be positive");
    if (k > 0 && r_seq[k] <= r_seq[k - 1]) throw std::invalid_argument("r sequence must be strictly increasing");
  }
  TowerParams p;
  p.r.assign(r_seq.begin(), r_seq.end());
  p.a = {1};
  p.b = {0};
  p.atilde = {1};
  for (std::size_t n = 1; n <= r_seq.size(); ++n) {
    const std::int64_t prev = p.atilde[n - 1];
    const std::int64_t an = checked_mul(checked_add(checked_mul(2, p.r[n - 1]), 1), prev);
    const std::int64_t bn = checked_mul(static_cast<std::int64_t>(2 * n - 1), prev);
    p.a.push_back(an);
    p.b.push_back(bn);
    p.atilde.push_back(checked_add(checked_add(an, bn), static_cast<std::int64_t>(n)));
  }
  return p;
}

LevelSets build_level_sets(const TowerParams& p, int n) {
  require_level(p, n, p.depth());
  LevelSets ls;
  ls.n = n;
  ls.F = p.F(n);
  ls.S = p.S(n);
  ls.Ftilde = p.Ftilde(n);
  ls.h_radius = n < p.depth() ? p.r[n] : 0;
  ls.i_radius = n;
  ls.s_in_f = ls.S.to_boxset().within(ls.F);
  if (ls.S.empty()) {
    ls.fs_equals_sf = true;
    ls.fs_in_ftilde = true;
  } else {
    const BoxSet fs = product(ls.F, ls.S).to_boxset();
    const BoxSet sf = product(ls.S, ls.F).to_boxset();
    ls.fs_equals_sf = fs == sf;
    ls.fs_in_ftilde = fs.within(ls.Ftilde);
    // Cross-check the rectangle algebra against the box-by-box product while it is cheap.
    const BoxSet F = ls.F.to_boxset(), S = ls.S.to_boxset();
    if (F.size() * S.size() <= 200'000)
      ls.fs_equals_sf = ls.fs_equals_sf && product(F, S) == fs && product(S, F) == sf;
  }
  return ls;
}

TilingReport verify_tiling(const TowerParams& p, int n, TilingGrid grid) {
  require_level(p, n, p.depth() - 1);
  const std::int64_t radius = grid == TilingGrid::H ? p.r[n] : n;
  const std::vector<GroupElement> elems = phi_images(p.atilde[n], radius, {0, 0});
  const BoxSet window = p.Ftilde(n).to_boxset();
  const SpreadResult right = spread(window, elems, Side::right);
  const SpreadResult left = spread(window, elems, Side::left);
  const BoxSet target = (grid == TilingGrid::H ? p.F(n + 1) : p.S(n + 1)).to_boxset();

  TilingReport t;
  t.copies = elems.size();
  t.disjoint = right.disjoint && left.disjoint;
  t.measure = right.set.measure();
  t.symdiff_measure = combine(right.set, target, SetOp::symdiff).measure();
  t.equals_target = right.set == target;
  t.left_right_agree = right.set == left.set;
  return t;
}

// ------------------------------------------------------------------ D_n

DiracComb::DiracComb(int n, std::int64_t b_n) : n_(n), b_(b_n) {
  if (n < 0) throw std::invalid_argument("negative comb level");
  if (n == 0) {
    b_ = 0;
    k_half_ = 0;
    q_ = 1;
    size_ = 2;
    return;
  }
  if (b_n <= 0) throw std::invalid_argument("comb half width must be positive");
  q_ = checked_mul(n, n);
  k_half_ = checked_mul(q_, b_n);
  size_ = static_cast<std::uint64_t>(checked_mul(checked_mul(2 * b_n, 2 * k_half_), 2));
}

GroupElement DiracComb::point(std::uint64_t idx) const {
  if (idx >= size_) throw std::out_of_range("comb index out of range");
  const int m = static_cast<int>(idx & 1U);
  if (n_ == 0) return {0, Rational(0), m};
  const std::uint64_t rest = idx >> 1;
  const std::uint64_t kcount = static_cast<std::uint64_t>(2 * k_half_);
  const std::int64_t ik = static_cast<std::int64_t>(rest % kcount);
  const std::int64_t ia = static_cast<std::int64_t>(rest / kcount);
  return {-b_ + 1 + ia, make_rational(-k_half_ + 1 + ik, q_), m};
}

std::uint64_t DiracComb::index_of(const GroupElement& g) const {
  if (n_ == 0) {
    if (g.x != 0 || g.a != 0) throw std::invalid_argument("element not in D_0");
    return g.eps;
  }
  const Rational scaled = g.a * rat(q_);
  if (scaled.get_den() != 1 || g.x <= -b_ || g.x > b_) throw std::invalid_argument("element not in D_n");
  const std::int64_t k = to_int64(scaled.get_num());
  if (k <= -k_half_ || k > k_half_) throw std::invalid_argument("element not in D_n");
  const std::uint64_t ia = static_cast<std::uint64_t>(g.x + b_ - 1);
  const std::uint64_t ik = static_cast<std::uint64_t>(k + k_half_ - 1);
  return ((ia * static_cast<std::uint64_t>(2 * k_half_) + ik) << 1) | g.eps;
}

std::vector<GroupElement> DiracComb::enumerate(std::uint64_t limit) const {
  if (size_ > limit)
    throw BudgetExceeded("D_" + std::to_string(n_) + " has " + std::to_string(size_) + " points, over the limit " +
                         std::to_string(limit));
  std::vector<GroupElement> out;
  out.reserve(size_);
  for (std::uint64_t k = 0; k < size_; ++k) out.push_back(point(k));
  return out;
}

DiracComb dirac_comb(const TowerParams& p, int n) {
  require_level(p, n, p.depth());
  return DiracComb(n, p.b[n]);
}

// ------------------------------------------------------------------ spacer maps

SpacerMap::SpacerMap(int n, std::uint64_t seed, std::int64_t radius, std::int64_t atilde, DiracComb comb,
                     std::vector<std::uint64_t> index)
    : n_(n), seed_(seed), radius_(radius), atilde_(atilde), comb_(comb), index_(std::move(index)) {
  const auto side = static_cast<std::size_t>(2 * radius + 1);
  if (index_.size() != side * side) throw std::invalid_argument("spacer map does not cover H_n");
  for (auto v : index_)
    if (v >= comb_.size()) throw std::invalid_argument("spacer map value outside D_n");
}

bool SpacerMap::in_grid(GridPoint h) const {
  return h.i >= -radius_ && h.i <= radius_ && h.j >= -radius_ && h.j <= radius_;
}

std::size_t SpacerMap::flat(GridPoint h) const {
  if (!in_grid(h)) throw std::out_of_range("grid point outside H_n");
  return static_cast<std::size_t>((h.i + radius_) * (2 * radius_ + 1) + (h.j + radius_));
}

GridPoint SpacerMap::grid_point(std::size_t k) const {
  const auto side = static_cast<std::int64_t>(2 * radius_ + 1);
  const auto kk = static_cast<std::int64_t>(k);
  return {kk / side - radius_, kk % side - radius_};
}

GroupElement SpacerMap::c(GridPoint h) const { return s(h) * phi(atilde_, h.i, h.j); }

std::vector<GroupElement> SpacerMap::spacer_set() const {
  std::vector<GroupElement> out;
  out.reserve(index_.size());
  for (std::size_t k = 0; k < index_.size(); ++k) out.push_back(c(grid_point(k)));
  return out;
}

SpacerMap sample_spacer_map(const TowerParams& p, int n, std::uint64_t seed) {
  require_level(p, n, p.depth() - 1);
  DiracComb comb = dirac_comb(p, n);
  Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(n));
  const auto side = static_cast<std::size_t>(2 * p.r[n] + 1);
  std::vector<std::uint64_t> idx(side * side);
  for (auto& v : idx) v = rng.below(comb.size());
  return SpacerMap(n, seed, p.r[n], p.atilde[n], comb, std::move(idx));
}

SpacerMap spacer_map_from_indices(const TowerParams& p, int n, std::uint64_t seed, std::vector<std::uint64_t> index) {
  require_level(p, n, p.depth() - 1);
  return SpacerMap(n, seed, p.r[n], p.atilde[n], dirac_comb(p, n), std::move(index));
}

SpreadResult spacer_image(const TowerParams& p, const SpacerMap& m) {
  const std::vector<GroupElement> cs = m.spacer_set();
  return spread(p.F(m.level()).to_boxset(), cs, Side::right);
}

// ------------------------------------------------------------------ xi_n

std::size_t XiPartition::atom_count() const {
  std::size_t total = 0;
  for (const auto& [col, cuts] : cuts_) total += cuts.size() - 1;
  return total;
}

std::vector<Box> XiPartition::atoms() const {
  std::vector<Box> out;
  out.reserve(atom_count());
  for (const auto& [col, cuts] : cuts_)
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
      out.push_back({col.second, Interval{cuts[k], cuts[k + 1]}, static_cast<std::uint8_t>(col.first)});
  return out;
}

bool XiPartition::is_measurable(const BoxSet& s) const {
  for (const auto& b : s.boxes()) {
    auto it = cuts_.find({b.eps, b.i});
    if (it == cuts_.end()) return false;
    const auto& cuts = it->second;
    if (!std::binary_search(cuts.begin(), cuts.end(), b.span.lo)) return false;
    if (!std::binary_search(cuts.begin(), cuts.end(), b.span.hi)) return false;
  }
  return true;
}

BoxSet XiPartition::random_union(Rng& rng, std::size_t k) const {
  std::vector<Box> all = atoms();
  k = std::min(k, all.size());
  std::set<std::size_t> chosen;
  while (chosen.size() < k) chosen.insert(static_cast<std::size_t>(rng.below(all.size())));
  std::vector<Box> picked;
  picked.reserve(k);
  for (auto idx : chosen) picked.push_back(all[idx]);
  return BoxSet::from_boxes(std::move(picked));
}

XiPartition xi_partition(const TowerParams& p, int n, const XiPartition* prev, const SpacerMap* prev_map,
                         std::size_t atom_budget) {
  require_level(p, n, p.depth());
  if ((prev == nullptr) != (prev_map == nullptr))
    throw std::invalid_argument("xi refinement needs both the previous partition and its spacer map");
  if (prev != nullptr && (prev->level() != n - 1 || prev_map->level() != n - 1))
    throw std::invalid_argument("xi refinement needs level n-1 data");

  const std::int64_t a = p.a[n];
  const std::int64_t steps_per_unit = n == 0 ? 1 : n;  // atoms of length exactly 1/n
  const Integer base = Integer(static_cast<long>(4 * a)) * Integer(static_cast<long>(a * steps_per_unit));
  if (base > Integer(static_cast<unsigned long>(atom_budget)))
    throw BudgetExceeded("xi_" + std::to_string(n) + " grid alone needs " + base.get_str() +
                         " atoms, over the atom budget " + std::to_string(atom_budget));

  // Working cut sets per column.
  std::map<std::pair<int, std::int64_t>, std::set<Rational>> work;
  for (int e = 0; e < 2; ++e) {
    for (std::int64_t i = -a + 1; i <= a; ++i) {
      auto& cuts = work[{e, i}];
      for (std::int64_t k = -a * steps_per_unit; k <= a * steps_per_unit; ++k)
        cuts.insert(make_rational(k, steps_per_unit));
    }
  }
  const Rational lo = rat(-a), hi = rat(a);
  auto add_cut = [&](int e, std::int64_t i, const Rational& t) {
    auto it = work.find({e, i});
    if (it == work.end() || !(lo < t && t < hi)) return;
    it->second.insert(t);
  };
  std::size_t count = static_cast<std::size_t>(base.get_ui());
  auto recount = [&] {
    count = 0;
    for (const auto& [col, cuts] : work) count += cuts.size() - 1;
    if (count > atom_budget)
      throw BudgetExceeded("xi_" + std::to_string(n) + " refinement exceeds the atom budget " +
                           std::to_string(atom_budget));
  };

  if (prev != nullptr) {
    const std::vector<Box> prev_atoms = prev->atoms();
    for (const auto& c : prev_map->spacer_set()) {
      for (const auto& b : prev_atoms) {
        const Rational shift = b.eps == 0 ? c.a : Rational(-c.a);
        const int e = b.eps ^ c.eps;
        add_cut(e, b.i + c.x, b.span.lo + shift);
        add_cut(e, b.i + c.x, b.span.hi + shift);
      }
    }
    recount();
  }

  // Inversion: {i}x(p,q]x{0} -> {-i}x[-q,-p)x{0}; {i}x(p,q]x{1} -> {-i}x(p,q]x{1}.
  for (int e = 0; e < 2; ++e) {
    for (std::int64_t i = -a + 1; i <= a - 1; ++i) {
      if (i > -i) continue;
      auto& mine = work[{e, i}];
      auto& other = work[{e, -i}];
      std::set<Rational> merged = mine;
      for (const auto& t : other) merged.insert(e == 0 ? Rational(-t) : t);
      std::set<Rational> mirrored;
      for (const auto& t : merged) mirrored.insert(e == 0 ? Rational(-t) : t);
      mine = std::move(merged);
      other = std::move(mirrored);
    }
  }
  recount();

  XiPartition xi;
  xi.n_ = n;
  for (auto& [col, cuts] : work) xi.cuts_[col] = std::vector<Rational>(cuts.begin(), cuts.end());
  return xi;
}

// ------------------------------------------------------------------ balance

BalanceReport certify_balanced(const SpacerMap& m) {
  BalanceReport r;
  r.n = m.level();
  for (auto idx : m.indices()) (m.comb().level_of(idx) == 0 ? r.level0 : r.level1) += 1;
  const Rational total = rat(r.level0 + r.level1);
  const Rational half(1, 2);
  r.deviation = abs_of(rat(r.level0) / total - half) + abs_of(rat(r.level1) / total - half);
  if (r.n >= 1) r.threshold = make_rational(1, r.n);
  r.pass = !r.threshold || r.deviation < *r.threshold;
  return r;
}

// ------------------------------------------------------------------ dJlem

std::vector<std::int64_t> default_djlem_lengths(const SpacerMap& m) {
  std::vector<std::int64_t> out;
  if (m.level() == 0) return out;
  const std::int64_t q = static_cast<std::int64_t>(m.level()) * m.level();
  for (std::int64_t N = m.radius() / q + 1; N <= 2 * m.radius() + 1; ++N) out.push_back(N);
  return out;
}

Rational djlem_distance(const SpacerMap& m, std::int64_t N, GridPoint h, GridPoint hp) {
  if (N <= 0) throw std::invalid_argument("window length must be positive");
  const std::uint64_t D = m.comb().size();
  std::vector<unsigned __int128> pairs;
  pairs.reserve(static_cast<std::size_t>(N));
  for (std::int64_t t = 0; t < N; ++t) {
    const auto u = m.index_at({h.i + t, h.j});
    const auto v = m.index_at({hp.i + t, hp.j});
    pairs.push_back(static_cast<unsigned __int128>(u) * D + v);
  }
  std::sort(pairs.begin(), pairs.end());
  const Integer universe = Integer(static_cast<unsigned long>(D)) * Integer(static_cast<unsigned long>(D));
  const Rational u(Integer(1), universe);
  Rational total = 0;
  std::size_t distinct = 0;
  for (std::size_t k = 0; k < pairs.size();) {
    std::size_t e = k;
    while (e < pairs.size() && pairs[e] == pairs[k]) ++e;
    total += abs_of(make_rational(static_cast<std::int64_t>(e - k), N) - u);
    ++distinct;
    k = e;
  }
  total += Rational(universe - Integer(static_cast<unsigned long>(distinct))) * u;
  return total;
}

DjlemReport certify_djlem(const SpacerMap& m, std::uint64_t pair_budget, std::span<const std::int64_t> lengths,
                          std::uint64_t seed, Exec exec) {
  DjlemReport rep;
  rep.n = m.level();
  if (rep.n == 0) throw std::invalid_argument("dJlem is stated for n >= 1");
  rep.threshold = make_rational(1, rep.n);
  rep.exhaustive = true;
  const std::int64_t r = m.radius();
  const std::int64_t q = static_cast<std::int64_t>(rep.n) * rep.n;
  Rng rng = Rng::stream(seed, 0xd1e7ULL, static_cast<std::uint64_t>(rep.n));

  std::vector<DjlemRow> rows;
  for (std::int64_t N : lengths) {
    if (!(N * q > r)) {
      rep.notices.push_back("N=" + std::to_string(N) + " skipped: needs N > r_n/n^2");
      continue;
    }
    const std::int64_t width = 2 * r + 2 - N;  // admissible first coordinates
    if (width <= 0) {
      rep.notices.push_back("N=" + std::to_string(N) + " skipped: no admissible pairs");
      continue;
    }
    const std::int64_t side = 2 * r + 1;
    const std::uint64_t M = static_cast<std::uint64_t>(width * side);
    const std::uint64_t total_pairs = M * (M - 1) / 2;
    auto point_of = [&](std::uint64_t k) {
      return GridPoint{-r + static_cast<std::int64_t>(k) / side, -r + static_cast<std::int64_t>(k) % side};
    };
    if (total_pairs == 0) {
      rep.notices.push_back("N=" + std::to_string(N) + " skipped: no admissible pairs");
      continue;
    }
    if (total_pairs <= pair_budget) {
      for (std::uint64_t x = 0; x < M; ++x)
        for (std::uint64_t y = x + 1; y < M; ++y) rows.push_back({N, point_of(x), point_of(y), 0});
    } else {
      rep.exhaustive = false;
      for (std::uint64_t k = 0; k < pair_budget; ++k) {
        std::uint64_t x = rng.below(M), y = rng.below(M - 1);
        if (y >= x) ++y;
        if (y < x) std::swap(x, y);
        rows.push_back({N, point_of(x), point_of(y), 0});
      }
    }
  }

  auto dists = map_indexed<Rational>(
      rows.size(), [&](std::size_t k) { return djlem_distance(m, rows[k].N, rows[k].h, rows[k].hp); }, exec);
  rep.max_distance = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k].distance = std::move(dists[k]);
    if (rep.max_distance < rows[k].distance) rep.max_distance = rows[k].distance;
  }
  rep.rows = std::move(rows);
  rep.pass = !rep.rows.empty() && rep.max_distance < rep.threshold;
  return rep;
}

// ------------------------------------------------------------------ discr_meas

DiscrTerms discr_meas_terms(const BoxSet& ag, const BoxSet& bh, const DiracComb& comb, const Rational& lambda_f) {
  if (comb.level() < 1) throw std::invalid_argument("comb approximation is stated for n >= 1");
  const std::int64_t b = comb.half_width();
  const std::int64_t M = comb.k_half();
  const std::int64_t q = comb.denominator();
  const Interval s_real{rat(-b), rat(b)};
  Rational lhs = 0, rhs = 0;
  for (const auto& P : ag.boxes()) {
    for (const auto& Q : bh.boxes()) {
      const std::int64_t gap = P.i > Q.i ? P.i - Q.i : Q.i - P.i;
      const std::int64_t cnt = 2 * b - gap;
      if (cnt <= 0) continue;
      // k -> sigma k over (-M, M]; negation maps (lo, hi] to (-hi-1, -lo-1].
      const std::int64_t plo = P.eps == 0 ? -M : -M - 1, phi_ = P.eps == 0 ? M : M - 1;
      const std::int64_t qlo = Q.eps == 0 ? -M : -M - 1, qhi = Q.eps == 0 ? M : M - 1;
      const Rational weight = rat(2 * cnt);
      lhs += weight * overlap_lattice_sum(P.span, Q.span, plo, phi_, qlo, qhi, q);
      rhs += weight * overlap_integral(P.span, Q.span, signed_image(s_real, P.eps == 0 ? 1 : -1),
                                       signed_image(s_real, Q.eps == 0 ? 1 : -1));
    }
  }
  const Rational D(Integer(static_cast<unsigned long>(comb.size())));
  const Rational lambda_s = rat(8) * rat(b) * rat(b);
  DiscrTerms t;
  t.lhs = lhs / (D * D * lambda_f);
  t.rhs = rhs / (lambda_s * lambda_s * lambda_f);
  return t;
}

bool discr_side_condition(const TowerParams& p, int n, const BoxSet& a, const GroupElement& g) {
  const std::int64_t an = p.a.at(n), bn = p.b.at(n);
  const Hull hl = translate(g, a.hull(), Side::right);
  const Rational A = rat(an), B = rat(bn);
  for (const auto& l : hl.level) {
    if (!l.nonempty) continue;
    if (l.imin - bn < -an || l.imax + bn > an) return false;
    if (l.lo - B < -A || A < l.hi + B) return false;
  }
  return true;
}

DiscrReport certify_discr_meas(const TowerParams& p, int n, std::span<const DiscrSample> samples, Exec exec) {
  require_level(p, n, p.depth());
  if (n < 1) throw std::invalid_argument("comb approximation is stated for n >= 1");
  DiscrReport rep;
  rep.n = n;
  rep.threshold = make_rational(1, n);
  const DiracComb comb = dirac_comb(p, n);
  const Rational lambda_f = p.F(n).measure();

  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    if (discr_side_condition(p, n, s.a, s.g) && discr_side_condition(p, n, s.b, s.h)) {
      kept.push_back(k);
    } else {
      ++rep.discarded;
      std::ostringstream os;
      os << "sample " << k << " discarded: A g S_n or B h S_n leaves F_n (g=" << s.g << ", h=" << s.h << ")";
      rep.notices.push_back(os.str());
    }
  }
  auto terms = map_indexed<DiscrTerms>(
      kept.size(),
      [&](std::size_t k) {
        const auto& s = samples[kept[k]];
        return discr_meas_terms(translate(s.g, s.a, Side::right), translate(s.h, s.b, Side::right), comb, lambda_f);
      },
      exec);
  rep.max_difference = 0;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    Rational d = terms[k].difference();
    if (rep.max_difference < d) rep.max_difference = d;
    rep.rows.push_back({kept[k], std::move(terms[k])});
  }
  rep.evaluated = rep.rows.size();
  rep.pass = rep.evaluated > 0 && rep.max_difference < rep.threshold;
  return rep;
}

DiscrReport certify_discr_meas(const TowerParams& p, int n, const XiPartition& xi, std::size_t sample_budget,
                               std::uint64_t seed, bool exhaustive, Exec exec) {
  if (xi.level() != n) throw std::invalid_argument("partition level does not match");
  std::vector<DiscrSample> samples;
  if (exhaustive) {
    std::vector<BoxSet> usable;
    for (const auto& b : xi.atoms()) {
      BoxSet s = BoxSet::from_boxes({b});
      if (discr_side_condition(p, n, s, GroupElement::identity())) usable.push_back(std::move(s));
    }
    samples.reserve(usable.size() * usable.size() + sample_budget);
    for (const auto& u : usable)
      for (const auto& v : usable) samples.push_back({u, v, GroupElement::identity(), GroupElement::identity()});
  }
  Rng rng = Rng::stream(seed, 0xd15cULL, static_cast<std::uint64_t>(n));
  const std::int64_t steps = 2 * n;
  for (std::size_t k = 0; k < sample_budget; ++k) {
    DiscrSample s;
    s.a = xi.random_union(rng, 1 + rng.below(4));
    s.b = xi.random_union(rng, 1 + rng.below(4));
    s.g = {rng.between(-1, 1), rng.grid_point(rat(-1), rat(1), static_cast<std::uint64_t>(steps)),
           static_cast<int>(rng.coin())};
    s.h = {rng.between(-1, 1), rng.grid_point(rat(-1), rat(1), static_cast<std::uint64_t>(steps)),
           static_cast<int>(rng.coin())};
    samples.push_back(std::move(s));
  }
  return certify_discr_meas(p, n, samples, exec);
}

// ------------------------------------------------------------------ (C,F)

CfReport verify_cf_conditions(const TowerParams& p, std::span<const SpacerMap> maps) {
  CfReport rep;
  for (std::size_t k = 0; k < maps.size(); ++k) {
    const SpacerMap& m = maps[k];
    const int n = static_cast<int>(k);
    if (m.level() != n) throw std::invalid_argument("spacer maps must be given for levels 0, 1, 2, ...");
    require_level(p, n, p.depth() - 1);
    CfLevelReport lr;
    lr.n = n;
    std::vector<GroupElement> cs = m.spacer_set();
    lr.spacer_count = cs.size();
    std::vector<GroupElement> sorted = cs;
    std::sort(sorted.begin(), sorted.end());
    lr.distinct = static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
    lr.cf2 = lr.spacer_count > 1 && lr.distinct == lr.spacer_count;
    if (!lr.cf2)
      rep.failures.push_back({n, "CF2", std::to_string(lr.distinct) + " distinct of " + std::to_string(cs.size())});

    const BoxSet F = p.F(n).to_boxset();
    const SpreadResult img = spread(F, cs, Side::right);
    lr.cf3 = img.set.within(p.F(n + 1));
    lr.cf4 = img.disjoint;
    if (!lr.cf3) {
      for (std::size_t u = 0; u < cs.size(); ++u) {
        if (!translate(cs[u], F, Side::right).within(p.F(n + 1))) {
          std::ostringstream os;
          os << "F_n c leaves F_{n+1} for c=" << cs[u];
          rep.failures.push_back({n, "CF3", os.str()});
          break;
        }
      }
    }
    if (!lr.cf4) {
      bool found = false;
      for (std::size_t u = 0; u < cs.size() && !found; ++u) {
        const BoxSet fu = translate(cs[u], F, Side::right);
        for (std::size_t v = u + 1; v < cs.size() && !found; ++v) {
          if (!combine(fu, translate(cs[v], F, Side::right), SetOp::intersect).empty()) {
            std::ostringstream os;
            os << "F_n c and F_n c' overlap for c=" << cs[u] << ", c'=" << cs[v];
            rep.failures.push_back({n, "CF4", os.str()});
            found = true;
          }
        }
      }
      if (!found) rep.failures.push_back({n, "CF4", "copies overlap"});
    }
    rep.levels.push_back(lr);
  }
  return rep;
}

GapReport cfgap_query(const TowerParams& p, std::span<const SpacerMap> maps, const GroupElement& g) {
  GapReport rep;
  rep.g = g;
  for (std::size_t k = 0; k < maps.size(); ++k) {
    const int n = static_cast<int>(k);
    const Hull h = translate(g, spacer_image(p, maps[k]).set.hull(), Side::left);
    const std::int64_t a = p.a[n + 1];
    const Rational A = rat(a);
    GapLevel gl;
    gl.n = n;
    gl.real_excess = 0;
    for (const auto& l : h.level) {
      if (!l.nonempty) continue;
      gl.int_excess = std::max({gl.int_excess, l.imax - a, -a + 1 - l.imin});
      const Rational up = l.hi - A, down = -A - l.lo;
      if (gl.real_excess < up) gl.real_excess = up;
      if (gl.real_excess < down) gl.real_excess = down;
    }
    gl.holds = gl.int_excess == 0 && gl.real_excess == 0;
    rep.levels.push_back(gl);
  }
  for (int m = static_cast<int>(rep.levels.size()); m > 0 && rep.levels[m - 1].holds; --m) rep.least_level = m - 1;
  return rep;
}

// ------------------------------------------------------------------ main lemma

MainLemWindows mainlem_windows(const TowerParams& p, int n, const GroupElement& fprime, GridPoint h) {
  if (n < 2) throw std::invalid_argument("window bounds need n >= 2");
  require_level(p, n, p.depth());
  if (!p.Ftilde(n - 1).contains(fprime)) throw std::invalid_argument("f' must lie in F~_{n-1}");
  const std::int64_t at = p.atilde[n - 1];

  MainLemWindows w;
  w.f = fprime * phi(at, h.i, h.j);
  w.alpha = w.f.eps;
  const GridPoint hstar{h.i, -h.j};
  const Rect Ft = p.Ftilde(n - 1);
  const BoxSet Fa = Ft.level_only(w.alpha).to_boxset();
  const BoxSet Fb = Ft.level_only(1 - w.alpha).to_boxset();
  auto window = [&](std::int64_t radius) {
    const auto ea = phi_images(at, radius, h);
    const auto eb = phi_images(at, radius, hstar);
    return combine(spread(Fa, ea, Side::right).set, spread(Fb, eb, Side::right).set, SetOp::unite);
  };
  w.lminus = n >= 2 ? window(n - 2) : BoxSet{};
  w.lplus = window(n);
  w.fs = translate(w.f, p.S(n).to_boxset(), Side::left);
  w.lower_inclusion = is_subset_mod_null(w.lminus, w.fs);
  w.upper_inclusion = is_subset_mod_null(w.fs, w.lplus);
  w.symdiff_ratio = combine(w.fs, w.lminus, SetOp::symdiff).measure() / p.S(n).measure();
  const std::int64_t in = (2 * n + 1) * (2 * n + 1), in2 = (2 * n - 3) * (2 * n - 3), in1 = (2 * n - 1) * (2 * n - 1);
  w.ratio_bound = make_rational(in - in2, in1);
  return w;
}

Rect core_set(const TowerParams& p, int n) {
  require_level(p, n, p.depth());
  const std::int64_t a = p.a[n], b = p.b[n];
  Rect r;
  if (a < 2 * b) {
    r.ilo = r.ihi = 0;
    r.real = {Interval{0, 0}, Interval{0, 0}};
    return r;
  }
  r.ilo = -a + 2 * b - 1;
  r.ihi = a - 2 * b + 1;
  const Interval span{rat(-a + 2 * b), rat(a - 2 * b)};
  r.real = {span, span};
  return r;
}

bool core_contains(const TowerParams& p, int n, const GroupElement& f) {
  require_level(p, n, p.depth());
  if (!p.F(n).contains(f)) return false;
  const BoxSet S = p.S(n).to_boxset();
  return translate(f, product(S, invert_set(S)), Side::left).within(p.F(n));
}

}  // namespace cfsim
