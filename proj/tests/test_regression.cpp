// Frozen outputs of the exact evaluators (r = 2,3,4, seed 1). The evaluators
// themselves are checked against independent oracles in test_cf_space; these
// values only guard against unintended changes.
#include "cfsim/lab.hpp"
#include "doctest.h"

using namespace cfsim;

namespace {

Rational q(std::int64_t p, std::int64_t d = 1) { return make_rational(p, d); }

struct Fixture {
  TowerParams p = build_params(std::vector<std::int64_t>{2, 3, 4});
  MeasureContext ctx = make_context(p, 1);
};

}  // namespace

TEST_CASE("mixing deviations along 2a~_1, 2a~_2") {
  Fixture fx;
  const auto atoms = xi_partition(fx.p, 1).atoms();
  std::vector<CylinderPair> pairs;
  const int pick[] = {0, 57, 123};
  for (int u : pick)
    for (int v : pick)
      pairs.push_back({{1, BoxSet::from_boxes({atoms[u]})}, {1, BoxSet::from_boxes({atoms[v]})}, ""});
  const auto gs = designated_mixing_sequence(fx.ctx);
  REQUIRE(gs == std::vector<std::int64_t>{14, 144});
  const ExperimentReport rep = mixing_scan(fx.ctx, gs, pairs, Exec::serial);
  REQUIRE(rep.rows.size() == 18);
  const Rational d = q(1, 1719926784);
  const std::vector<Rational> dev{163487 * d, -2401 * d, -2401 * d, -2401 * d, 163487 * d, -2401 * d,
                                  -2401 * d,  -2401 * d, 163487 * d, 4895 * d,  671 * d,    1823 * d,
                                  799 * d,    4895 * d,  287 * d,    3743 * d,  2975 * d,   4895 * d};
  for (std::size_t k = 0; k < 18; ++k) CHECK(rep.rows[k][5].value == dev[k]);
  CHECK(rep.rows[0][2].value == q(1, 10368));
  CHECK(rep.rows[9][3].value == q(49, 373248));
}

TEST_CASE("joining distances per window") {
  Fixture fx;
  Rng rng = Rng::stream(1, 0x701);
  const PointExpansion x = sample_point(fx.ctx, 0, rng, true);
  const JoiningSetup s = paired_points(fx.ctx, x, 3, rng);
  std::vector<AveragingWindow> ws{averaging_window(fx.p, 1), averaging_window(fx.p, 2)};
  std::vector<Cylinder> cells{{0, BoxSet::single(0, 0, 1, 0)}, {0, BoxSet::single(1, -1, 0, 0)},
                              {0, BoxSet::single(0, -1, 1, 1)}, {0, BoxSet::single(1, 0, 1, 1)}};
  const ExperimentReport rep = joining_average(fx.ctx, s, ws, cells, Exec::serial);
  CHECK(rep.ok());
  CHECK(rep.find_summary("window_1.distance_to_product")->value == q(8844025261, 132434362368));
  CHECK(rep.find_summary("window_2.distance_to_product")->value == q(760887053, 14332723200));
}

TEST_CASE("joining with y = T_k x") {
  Fixture fx;
  Rng rng(3);
  const PointExpansion x = sample_point(fx.ctx, 0, rng, true);
  const GroupElement k(3, q(1, 2), 0);
  const JoiningSetup s{x, act(fx.ctx, k, x), k};
  std::vector<AveragingWindow> ws{averaging_window(fx.p, 1)};
  std::vector<Cylinder> cells{{0, BoxSet::single(0, 0, 1, 0)}, {0, BoxSet::single(1, -1, 0, 1)}};
  const ExperimentReport rep = joining_average(fx.ctx, s, ws, cells);
  for (const auto& c : rep.checks) CHECK_MESSAGE(c.pass, c.name);

  // y = x, k = e: the empirical table is diagonal
  const JoiningSetup same{x, x, GroupElement::identity()};
  const ExperimentReport diag = joining_average(fx.ctx, same, ws, cells);
  for (const auto& row : diag.rows)
    if (row[2].integer != row[3].integer) CHECK(row[4].value == 0);
}
