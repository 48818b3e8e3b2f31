#include <set>

#include "cfsim/lab.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace cfsim;

namespace {

TowerParams small() {
  std::vector<std::int64_t> r{2, 3, 4};
  return build_params(r);
}

Rational q(std::int64_t p, std::int64_t d = 1) { return make_rational(p, d); }

BoxSet box(std::int64_t i, Rational lo, Rational hi, int eps) {
  return BoxSet::from_boxes({Box{i, Interval{lo, hi}, static_cast<std::uint8_t>(eps)}});
}

}  // namespace

TEST_CASE("averaging windows") {
  TowerParams p = small();
  AveragingWindow w1 = averaging_window(p, 1), w2 = averaging_window(p, 2);
  CHECK(w1.k_half == 5);
  CHECK(w1.j_half == 3);
  CHECK(w2.k_half == 12);
  CHECK(w2.j_half == 1);
  std::set<std::int64_t> brute;
  for (int k = -5; k <= 5; ++k)
    for (int j = -3; j <= 3; ++j) brute.insert(k + 14 * j);
  CHECK(std::vector<std::int64_t>(brute.begin(), brute.end()) == w1.phi);
  CHECK(w1.phi.size() == 77);
  CHECK_THROWS(averaging_window(p, 3));

  std::vector<AveragingWindow> ws{w1, w2};
  auto checks = check_windows(p, ws);
  REQUIRE(checks.size() == 1);
  CHECK(checks[0].arithmetic_lhs == q(47));
  CHECK(checks[0].arithmetic_rhs == q(49, 2));
  CHECK_FALSE(checks[0].arithmetic);
  std::set<std::int64_t> sums;
  for (auto u : w2.phi)
    for (auto v : w1.phi) sums.insert(u + v);
  CHECK(checks[0].sumset == sums.size());
  CHECK(checks[0].bound == 3 * w2.phi.size());
}

TEST_CASE("report rendering") {
  ExperimentReport r;
  r.experiment = "demo";
  r.seed = 4;
  r.columns = {"name", "count", "value"};
  r.rows.push_back({Cell::of("a,b"), Cell::of(3), Cell::of(q(1, 3))});
  r.rows.push_back({Cell::of("c"), Cell::of(-1), Cell::of("")});
  r.summary.push_back({"total", Cell::of(q(2))});
  r.add_check("fine", true);
  auto doc = nlohmann::json::parse(to_json(r));
  CHECK(doc["schema"] == kReportSchema);
  CHECK(doc["rows"][0]["value"]["exact"] == "1/3");
  CHECK(doc["rows"][0]["value"]["decimal"] == "0.333333333333");
  CHECK(doc["rows"][0]["count"] == 3);
  CHECK(doc["ok"] == true);
  const std::string csv = to_csv(r);
  CHECK(csv.find("name,count,value,value_dec\n") != std::string::npos);
  CHECK(csv.find("\"a,b\",3,1/3,0.333333333333\n") != std::string::npos);
  CHECK(csv.find("c,-1,,\n") != std::string::npos);
  r.add_check("broken", false);
  CHECK_FALSE(r.ok());
}

TEST_CASE("LemWM evaluators agree") {
  TowerParams p = small();
  MeasureContext ctx = make_context(p, 3);
  Rng rng(12);
  std::vector<std::pair<BoxSet, BoxSet>> pairs;
  pairs.push_back({p.F(1).to_boxset(), p.F(1).to_boxset()});
  for (int k = 0; k < 6; ++k) {
    BoxSet a = intersect(random_small_boxset(rng, 3, 4, 2), p.F(1));
    BoxSet b = intersect(random_small_boxset(rng, 3, 4, 2), p.F(1));
    pairs.push_back({a, b});
  }
  for (const auto& [a, b] : pairs) {
    LemwmResult s = lemwm_evaluate(ctx, 1, a, b, Exec::serial);
    LemwmResult par = lemwm_evaluate(ctx, 1, a, b, Exec::parallel);
    CHECK(s.equal());
    CHECK(s.direct == par.direct);
    CHECK(s.excluded <= s.excluded_bound);
    CHECK(s.excluded >= 0);
  }
  ExperimentReport rep = lemwm_crosscheck(ctx, 1, pairs);
  CHECK(rep.ok());
  CHECK_THROWS_AS(lemwm_evaluate(ctx, 3, BoxSet{}, BoxSet{}), NeedsDeeperTail);
}

TEST_CASE("Fubini identity") {
  Rng rng(77);
  for (int k = 0; k < 20; ++k) {
    BoxSet a = random_small_boxset(rng, 3, 2, 3);
    BoxSet b = random_small_boxset(rng, 3, 2, 3);
    BoxSet s = random_small_boxset(rng, 3, 2, 3);
    TechlemResult e = techlem_exact(a, b, s);
    CHECK(e.lhs == e.rhs);
    CHECK(e.lhs >= 0);
    TechlemResult mc = techlem_montecarlo(a, b, s, 400, 5);
    CHECK(std::abs(Rational(mc.lhs - e.lhs).get_d()) <= mc.lhs_halfwidth);
    CHECK(std::abs(Rational(mc.rhs - e.rhs).get_d()) <= mc.rhs_halfwidth);
  }
  // A = B = S = [0,1] at level 0, value worked by hand
  BoxSet unit = box(0, q(0), q(1), 0);
  TechlemResult e = techlem_exact(unit, unit, unit);
  CHECK(e.lhs == q(2, 3));  // ∫∫ (1-|x-y|)_+ over [0,1]^2
  TechlemResult fb = techlem_check(unit, unit, unit, TechlemMode::exact, 100, 1, 0);
  CHECK(fb.mode == TechlemMode::montecarlo);
  CHECK_FALSE(fb.notice.empty());
}

TEST_CASE("balanced products and density") {
  TowerParams p = small();
  MeasureContext ctx = make_context(p, 9);
  ExperimentReport bal = balanced_product_check(ctx, 1, 20, 4, Exec::serial);
  CHECK(bal.find_summary("epsilon") != nullptr);
  for (const auto& c : bal.checks)
    if (c.name != "one_over_n_threshold") CHECK_MESSAGE(c.pass, c.name);
  ExperimentReport bal_par = balanced_product_check(ctx, 1, 20, 4, Exec::parallel);
  CHECK(to_json(bal) == to_json(bal_par));

  ExperimentReport den = mainlem_density_check(ctx, 2, 6, 4);
  CHECK(den.rows.size() == 6);
  CHECK(den.find_summary("max_deviation") != nullptr);
}

TEST_CASE("certify level 1") {
  TowerParams p = small();
  CertifyOptions opt;
  opt.level = 1;
  opt.seed = 21;
  opt.exhaustive = true;
  opt.sample_budget = 10;
  ExperimentReport serial = certify_level(p, opt, Exec::serial);
  ExperimentReport par = certify_level(p, opt, Exec::parallel);
  CHECK(to_json(serial) == to_json(par));
  CHECK(serial.find_summary("djlem.exhaustive")->text == "true");
  CHECK(serial.find_summary("discr_meas.pass") != nullptr);
}

TEST_CASE("build report, factor check, mixing") {
  TowerParams p = small();
  MeasureContext ctx = make_context(p, 6);
  ExperimentReport b = build_report(p, ctx.maps());
  CHECK(b.rows.size() == 4);
  for (const auto& c : b.checks)
    if (c.name.rfind("tiling", 0) == 0 || c.name == "level_sets") CHECK_MESSAGE(c.pass, c.name);

  std::vector<Rational> bs{q(1, 2), q(3)};
  ExperimentReport f = factor_check(ctx, bs, 20, 2);
  CHECK(f.ok());
  std::vector<Rational> zero{q(0)};
  CHECK_THROWS(factor_check(ctx, zero, 1, 1));

  Cylinder full{3, p.F(3).to_boxset()};
  Cylinder a{1, box(1, q(-1), q(2), 0)};
  std::vector<CylinderPair> pairs{{full, full, "full"}, {a, a, "a"}};
  auto gs = designated_mixing_sequence(ctx);
  CHECK(gs == std::vector<std::int64_t>{14, 144});
  ExperimentReport mix = mixing_scan(ctx, gs, pairs);
  CHECK(mix.rows.size() == 4);
  CHECK(mix.ok());
}

TEST_CASE("joinings") {
  TowerParams p = small();
  MeasureContext ctx = make_context(p, 8);
  Rng rng(31);
  PointExpansion x = sample_point(ctx, 0, rng, true);
  JoiningSetup s = paired_points(ctx, x, 1, rng);
  REQUIRE(s.k.has_value());
  CHECK(s.y.digits == s.x.digits);
  std::vector<AveragingWindow> ws{averaging_window(p, 1)};
  std::vector<Cylinder> cells{{0, box(0, q(-1), q(1), 0)}, {0, box(1, q(-1), q(1), 1)}};
  ExperimentReport rep = joining_average(ctx, s, ws, cells);
  for (const auto& c : rep.checks) CHECK_MESSAGE(c.pass, c.name);
  CHECK(rep.find_summary("window_1.distance_to_product") != nullptr);
  ExperimentReport rep_serial = joining_average(ctx, s, ws, cells, Exec::serial);
  CHECK(to_json(rep) == to_json(rep_serial));
}
