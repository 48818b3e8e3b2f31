#include <set>

#include "cfsim/dist.hpp"
#include "cfsim/tower.hpp"
#include "doctest.h"

using namespace cfsim;

namespace {

TowerParams small() {
  std::vector<std::int64_t> r{2, 3, 4};
  return build_params(r);
}

Rational q(std::int64_t p, std::int64_t d = 1) { return make_rational(p, d); }

}  // namespace

TEST_CASE("recurrences") {
  TowerParams p = small();
  CHECK(p.depth() == 3);
  CHECK(p.a == std::vector<std::int64_t>{1, 5, 49, 648});
  CHECK(p.b == std::vector<std::int64_t>{0, 1, 21, 360});
  CHECK(p.atilde == std::vector<std::int64_t>{1, 7, 72, 1011});

  std::vector<std::int64_t> r2{4, 6, 8};
  TowerParams p2 = build_params(r2);
  CHECK(p2.a[3] == 3026);
  CHECK(p2.b[3] == 890);
  CHECK(p2.atilde[3] == 3919);

  for (int n = 0; n + 1 <= p.depth(); ++n) {
    CHECK(p.a[n + 1] == (2 * p.r[n] + 1) * p.atilde[n]);
    CHECK(p.b[n + 1] == (2 * n + 1) * p.atilde[n]);
  }

  auto diag = p.growth_diagnostics();
  CHECK(diag[0] == 0);
  CHECK(diag[2] == q(16, 4));

  std::vector<std::int64_t> bad1{}, bad2{3, 3}, bad3{0, 1};
  CHECK_THROWS_AS(build_params(bad1), std::invalid_argument);
  CHECK_THROWS_AS(build_params(bad2), std::invalid_argument);
  CHECK_THROWS_AS(build_params(bad3), std::invalid_argument);
  std::vector<std::int64_t> huge{1000000, 2000000, 3000000, 4000000};
  CHECK_THROWS_AS(build_params(huge), std::overflow_error);
}

TEST_CASE("level sets") {
  TowerParams p = small();
  for (int n = 0; n <= 3; ++n) {
    LevelSets ls = build_level_sets(p, n);
    CHECK(ls.s_in_f);
    CHECK(ls.fs_equals_sf);
    CHECK(ls.fs_in_ftilde);
  }
  LevelSets l1 = build_level_sets(p, 1);
  CHECK(l1.F.measure() == 200);
  CHECK(l1.S.measure() == 8);
  CHECK(l1.Ftilde.measure() == 392);
  CHECK(l1.h_radius == 3);
  CHECK(l1.i_radius == 1);
  CHECK_THROWS(build_level_sets(p, 4));
}

TEST_CASE("tilings") {
  TowerParams p = small();
  for (int n = 0; n < 3; ++n) {
    for (auto grid : {TilingGrid::I, TilingGrid::H}) {
      TilingReport t = verify_tiling(p, n, grid);
      CHECK(t.disjoint);
      CHECK(t.equals_target);
      CHECK(t.left_right_agree);
      CHECK(t.symdiff_measure == 0);
    }
  }
  TilingReport s2 = verify_tiling(p, 1, TilingGrid::I);
  CHECK(s2.copies == 9);
  CHECK(s2.measure == 3528);
  TilingReport f2 = verify_tiling(p, 1, TilingGrid::H);
  CHECK(f2.copies == 49);
  CHECK(f2.measure == 19208);
}

TEST_CASE("dirac combs") {
  TowerParams p = small();
  CHECK(dirac_comb(p, 0).size() == 2);
  CHECK(dirac_comb(p, 1).size() == 8);
  CHECK(dirac_comb(p, 2).size() == 14112);
  CHECK(dirac_comb(p, 3).size() == 2ULL * 720 * (2 * 9 * 360));

  for (int n = 1; n <= 2; ++n) {
    DiracComb d = dirac_comb(p, n);
    auto pts = d.enumerate();
    Rect S = p.S(n);
    std::set<GroupElement> seen;
    std::size_t lv0 = 0;
    for (std::uint64_t k = 0; k < pts.size(); ++k) {
      CHECK(S.contains(pts[k]));
      CHECK(d.index_of(pts[k]) == k);
      CHECK(d.level_of(k) == pts[k].eps);
      lv0 += pts[k].eps == 0;
      seen.insert(pts[k]);
      // a ∈ (-b, b], k ∈ (-n²b, n²b]
      Rational scaled = pts[k].a * q(n * n);
      CHECK(scaled.get_den() == 1);
    }
    CHECK(seen.size() == pts.size());
    CHECK(lv0 * 2 == pts.size());
    auto kappa = DiscreteDist<GroupElement>::uniform(pts);
    auto levels = pushforward(kappa, [](const GroupElement& g) { return project_level(g); });
    std::vector<int> z2{0, 1};
    CHECK(dist_l1(levels, DiscreteDist<int>::uniform(z2)) == 0);
  }
  DiracComb d1 = dirac_comb(p, 1);
  CHECK_THROWS(d1.index_of(GroupElement(2, 0, 0)));
  CHECK_THROWS(d1.index_of(GroupElement(0, q(1, 2), 0)));
  CHECK_THROWS_AS(dirac_comb(p, 3).enumerate(1000), BudgetExceeded);
}

TEST_CASE("spacer maps") {
  TowerParams p = small();
  for (int n = 0; n < 3; ++n) {
    SpacerMap m = sample_spacer_map(p, n, 11);
    CHECK(m.grid_size() == static_cast<std::size_t>((2 * p.r[n] + 1) * (2 * p.r[n] + 1)));
    auto cs = m.spacer_set();
    CHECK(cs.size() == m.grid_size());
    for (std::size_t k = 0; k < m.grid_size(); ++k) {
      GridPoint h = m.grid_point(k);
      CHECK(m.flat(h) == k);
      CHECK(p.S(n).contains(m.s(h)) == (n > 0));
      CHECK(cs[k] == m.s(h) * phi(p.atilde[n], h.i, h.j));
    }
    SpacerMap again = sample_spacer_map(p, n, 11);
    CHECK(again.indices() == m.indices());
    CHECK(sample_spacer_map(p, n, 12).indices() != m.indices());
  }
  SpacerMap m = sample_spacer_map(p, 1, 3);
  CHECK_THROWS(m.flat({4, 0}));
  CHECK_THROWS(spacer_map_from_indices(p, 1, 0, std::vector<std::uint64_t>(49, 8)));
  CHECK_THROWS(spacer_map_from_indices(p, 1, 0, std::vector<std::uint64_t>(48, 0)));
}

TEST_CASE("balance certificate") {
  TowerParams p = small();
  SpacerMap zero = spacer_map_from_function(p, 1, [](GridPoint) { return GroupElement(0, 0, 0); });
  BalanceReport b0 = certify_balanced(zero);
  CHECK(b0.deviation == 1);
  CHECK_FALSE(b0.pass);
  CHECK(*b0.threshold == 1);

  // |H_n| is odd, so the best split is off by one point.
  SpacerMap alt = spacer_map_from_function(p, 1, [](GridPoint h) {
    return GroupElement(0, 0, static_cast<int>(((h.i + h.j) % 2 + 2) % 2));
  });
  BalanceReport ba = certify_balanced(alt);
  CHECK(ba.level0 == 25);
  CHECK(ba.deviation == q(1, 49));
  CHECK(ba.pass);
}

TEST_CASE("dJlem distance against a direct evaluation") {
  TowerParams p = small();
  SpacerMap m = sample_spacer_map(p, 1, 5);
  auto D = m.comb().enumerate();
  std::vector<std::pair<GroupElement, GroupElement>> all;
  for (auto& u : D)
    for (auto& v : D) all.push_back({u, v});
  auto uniform = DiscreteDist<std::pair<GroupElement, GroupElement>>::uniform(all);

  std::vector<std::int64_t> lengths = default_djlem_lengths(m);
  CHECK(lengths == std::vector<std::int64_t>{4, 5, 6, 7});
  for (std::int64_t N : lengths) {
    GridPoint h{-3, 1}, hp{-3, -2};
    std::vector<std::pair<GroupElement, GroupElement>> obs;
    for (std::int64_t t = 0; t < N; ++t) obs.push_back({m.s({h.i + t, h.j}), m.s({hp.i + t, hp.j})});
    auto emp = DiscreteDist<std::pair<GroupElement, GroupElement>>::empirical(obs);
    CHECK(djlem_distance(m, N, h, hp) == dist_l1(emp, uniform));
  }

  SpacerMap constant = spacer_map_from_function(p, 1, [](GridPoint) { return GroupElement(1, 0, 1); });
  DjlemReport c = certify_djlem(constant, 1'000'000, lengths, 1, Exec::serial);
  CHECK(c.exhaustive);
  CHECK(c.max_distance == 2 * (1 - q(1, 64)));
  CHECK_FALSE(c.pass);
  // (8 - N) * 7 admissible grid points, unordered pairs
  std::size_t expected = 0;
  for (std::int64_t N : lengths) expected += static_cast<std::size_t>((8 - N) * 7 * ((8 - N) * 7 - 1) / 2);
  CHECK(c.rows.size() == expected);

  std::vector<std::int64_t> short_lengths{1, 3, 8};
  DjlemReport s = certify_djlem(m, 100, short_lengths, 1, Exec::serial);
  CHECK(s.notices.size() == 3);
  CHECK(s.rows.empty());
}

TEST_CASE("dJlem serial and parallel agree") {
  TowerParams p = small();
  SpacerMap m = sample_spacer_map(p, 2, 9);
  auto lengths = default_djlem_lengths(m);
  DjlemReport a = certify_djlem(m, 50, lengths, 4, Exec::serial);
  DjlemReport b = certify_djlem(m, 50, lengths, 4, Exec::parallel);
  REQUIRE(a.rows.size() == b.rows.size());
  CHECK_FALSE(a.exhaustive);
  for (std::size_t k = 0; k < a.rows.size(); ++k) CHECK(a.rows[k].distance == b.rows[k].distance);
  CHECK(a.max_distance == b.max_distance);
}

TEST_CASE("comb sum against brute force over D_1") {
  TowerParams p = small();
  const int n = 1;
  DiracComb comb = dirac_comb(p, n);
  auto D = comb.enumerate();
  Rational lf = p.F(n).measure();
  std::vector<std::pair<BoxSet, BoxSet>> cases = {
      {BoxSet::single(0, 0, 1, 0), BoxSet::single(0, 0, 1, 0)},
      {BoxSet::single(1, q(-1, 2), 2, 1), BoxSet::single(0, -3, q(1, 3), 0)},
      {BoxSet::from_boxes({{-2, {-1, 0}, 0}, {3, {q(1, 4), q(7, 4)}, 1}}), BoxSet::single(2, -1, 1, 1)},
  };
  for (auto& [a, b] : cases) {
    Rational brute = 0;
    for (auto& x : D)
      for (auto& y : D)
        brute += combine(translate(x, a, Side::right), translate(y, b, Side::right), SetOp::intersect).measure();
    brute /= q(64) * lf;
    DiscrTerms t = discr_meas_terms(a, b, comb, lf);
    CHECK(t.lhs == brute);
    // RHS by a fine lattice: the comb sum with denominator Q tends to it.
    DiracComb fine(40, p.b[n]);
    DiscrTerms tf = discr_meas_terms(a, b, fine, lf);
    CHECK(abs_of(tf.lhs - t.rhs) < q(1, 100));
  }
}

TEST_CASE("discr_meas certificate") {
  TowerParams p = small();
  XiPartition xi = xi_partition(p, 1);
  CHECK(discr_side_condition(p, 1, BoxSet::single(4, 3, 4, 0), GroupElement::identity()));
  CHECK_FALSE(discr_side_condition(p, 1, BoxSet::single(5, 3, 4, 0), GroupElement::identity()));
  CHECK_FALSE(discr_side_condition(p, 1, BoxSet::single(0, 4, 5, 1), GroupElement::identity()));

  DiscrReport r = certify_discr_meas(p, 1, xi, 30, 2, false, Exec::serial);
  CHECK(r.evaluated + r.discarded == 30);
  CHECK(r.notices.size() == r.discarded);
  DiscrReport r2 = certify_discr_meas(p, 1, xi, 30, 2, false, Exec::parallel);
  CHECK(r2.max_difference == r.max_difference);
  REQUIRE(r2.rows.size() == r.rows.size());
  for (std::size_t k = 0; k < r.rows.size(); ++k) CHECK(r.rows[k].terms.lhs == r2.rows[k].terms.lhs);

  // A = B = F_n with g = h = e violates the side condition and is discarded.
  std::vector<DiscrSample> full{{p.F(1).to_boxset(), p.F(1).to_boxset(), {}, {}}};
  CHECK(certify_discr_meas(p, 1, full, Exec::serial).discarded == 1);
}

TEST_CASE("partitions") {
  TowerParams p = small();
  XiPartition x1 = xi_partition(p, 1);
  CHECK(x1.atom_count() == 200);
  auto atoms = x1.atoms();
  BoxSet all = BoxSet::from_boxes(atoms);
  CHECK(all == p.F(1).to_boxset());
  Rational sum = 0;
  for (auto& b : atoms) {
    sum += b.length();
    CHECK(b.length() <= 1);
  }
  CHECK(sum == 200);

  SpacerMap m1 = sample_spacer_map(p, 1, 21);
  XiPartition x2 = xi_partition(p, 2, &x1, &m1);
  auto atoms2 = x2.atoms();
  CHECK(BoxSet::from_boxes(atoms2) == p.F(2).to_boxset());
  std::set<std::tuple<int, std::int64_t, std::string, std::string>> keys;
  for (auto& b : atoms2) {
    CHECK(b.length() <= q(1, 2));
    keys.insert({b.eps, b.i, to_exact_string(b.span.lo), to_exact_string(b.span.hi)});
  }
  // symmetric wherever the inverse stays in F_2
  for (auto& b : atoms2) {
    BoxSet inv = invert_set(BoxSet::from_boxes({b}));
    if (!inv.within(p.F(2))) continue;
    const Box& ib = inv.boxes().front();
    CHECK(keys.count({ib.eps, ib.i, to_exact_string(ib.span.lo), to_exact_string(ib.span.hi)}) == 1);
  }
  // condition (ii): every A c is measurable
  for (const auto& c : m1.spacer_set())
    for (std::size_t k = 0; k < atoms.size(); k += 7)
      CHECK(x2.is_measurable(translate(c, BoxSet::from_boxes({atoms[k]}), Side::right)));

  CHECK_THROWS_AS(xi_partition(p, 2, &x1, &m1, 1000), BudgetExceeded);
  CHECK_THROWS_AS(xi_partition(p, 3), BudgetExceeded);
  CHECK_THROWS(xi_partition(p, 2, &x1, nullptr));

  Rng rng(3);
  BoxSet u = x1.random_union(rng, 5);
  CHECK(u.measure() == 5);
  CHECK(x1.is_measurable(u));
  CHECK_FALSE(x1.is_measurable(BoxSet::single(0, 0, q(1, 2), 0)));
}

TEST_CASE("(C,F) conditions") {
  TowerParams p = small();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::vector<SpacerMap> maps;
    for (int n = 0; n < 3; ++n) maps.push_back(sample_spacer_map(p, n, seed));
    CfReport rep = verify_cf_conditions(p, maps);
    CHECK(rep.ok());
    CHECK(rep.levels.size() == 3);
    for (auto& l : rep.levels) CHECK(l.spacer_count == l.distinct);

    GapReport g = cfgap_query(p, maps, GroupElement(1, 0, 0));
    REQUIRE(g.least_level.has_value());
    CHECK(*g.least_level == 1);
    CHECK_FALSE(g.levels[0].holds);
    CHECK(g.levels[0].int_excess == 1);
    GapReport big = cfgap_query(p, maps, GroupElement(500, 0, 0));
    CHECK_FALSE(big.least_level.has_value());
  }
  // spacer set with collisions: (CF4) fails with a named pair
  SpacerMap m = sample_spacer_map(p, 0, 1);
  std::vector<SpacerMap> maps{m};
  CHECK(verify_cf_conditions(p, maps).ok());
  std::vector<SpacerMap> wrong{sample_spacer_map(p, 1, 1)};
  CHECK_THROWS(verify_cf_conditions(p, wrong));
}

TEST_CASE("main lemma windows") {
  TowerParams p = small();
  MainLemWindows id = mainlem_windows(p, 2, GroupElement::identity(), {0, 0});
  CHECK(id.fs == p.S(2).to_boxset());
  CHECK(id.lower_inclusion);
  CHECK(id.upper_inclusion);
  CHECK(id.ratio_bound == q(24, 9));

  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const std::int64_t t = p.atilde[1];
    GroupElement fp(rng.between(-t + 1, t), rng.grid_point(q(-t), q(t), 1 << 10), rng.coin());
    if (fp.a == -t) continue;
    GridPoint h{rng.between(-2, 2), rng.between(-2, 2)};
    MainLemWindows w = mainlem_windows(p, 2, fp, h);
    CHECK(w.lower_inclusion);
    CHECK(w.upper_inclusion);
    CHECK(w.symdiff_ratio <= w.ratio_bound);
  }
  CHECK_THROWS(mainlem_windows(p, 1, GroupElement::identity(), {0, 0}));
  CHECK_THROWS(mainlem_windows(p, 2, GroupElement(8, 0, 0), {0, 0}));
}

TEST_CASE("core sets against the defining containment") {
  TowerParams p = small();
  Rect core = core_set(p, 1);
  CHECK(core.ilo == -4);
  CHECK(core.ihi == 4);
  CHECK(core.measure() == 8 * 6 * 2);
  CHECK(core.contains(GroupElement::identity()));
  for (std::int64_t x = -4; x <= 5; ++x)
    for (std::int64_t k = -20; k < 20; ++k)
      for (int e = 0; e < 2; ++e) {
        GroupElement f(x, q(2 * k + 1, 4), e);
        CHECK(core.contains(f) == core_contains(p, 1, f));
      }
  // the fraction of F_n outside the core shrinks with r
  std::vector<std::int64_t> r2{4, 6, 8};
  TowerParams p2 = build_params(r2);
  for (int n = 1; n <= 3; ++n) {
    Rational lost1 = 1 - core_set(p, n).measure() / p.F(n).measure();
    Rational lost2 = 1 - core_set(p2, n).measure() / p2.F(n).measure();
    CHECK(lost2 < lost1);
  }
}
