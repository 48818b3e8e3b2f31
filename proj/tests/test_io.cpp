#include "cfsim/io.hpp"
#include "doctest.h"

using namespace cfsim;

namespace {

TowerParams small() {
  std::vector<std::int64_t> r{2, 3, 4};
  return build_params(r);
}

}  // namespace

TEST_CASE("tower round trip replays maps") {
  TowerParams p = small();
  MeasureContext ctx = make_context(p, 42);
  const std::string text = tower_to_json(p, ctx.maps());
  LoadedTower t = tower_from_json(text);
  CHECK(t.params.a == p.a);
  REQUIRE(t.maps.size() == 3);
  for (int n = 0; n < 3; ++n) {
    CHECK(t.maps[n].indices() == ctx.map(n).indices());
    CHECK(t.maps[n].seed() == ctx.map(n).seed());
  }
  CHECK(tower_to_json(t.params, t.maps) == text);
}

TEST_CASE("tower documents are validated") {
  CHECK_THROWS_AS(tower_from_json("{}"), std::invalid_argument);
  CHECK_THROWS_AS(tower_from_json("not json"), std::invalid_argument);
  CHECK_THROWS_AS(tower_from_json(R"({"schema":"cfsim.tower/1","r":[2,3],"a":[1,5,99]})"), std::invalid_argument);
  CHECK_THROWS_AS(tower_from_json(R"({"schema":"cfsim.tower/1","r":[2],"maps":[{"level":0,"seed":1,"indices":[0]}]})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      tower_from_json(R"({"schema":"cfsim.tower/1","r":[0],"maps":[{"level":0,"seed":1,"indices":[7]}]})"),
      std::invalid_argument);
}

TEST_CASE("points and cylinders round trip") {
  TowerParams p = small();
  MeasureContext ctx = make_context(p, 3);
  Rng rng(5);
  for (int k = 0; k < 10; ++k) {
    PointExpansion x = sample_point(ctx, k % 3, rng);
    CHECK(point_from_json(point_to_json(x)) == x);
  }
  Cylinder c{1, BoxSet::from_boxes({{1, {make_rational(-1, 3), make_rational(5, 2)}, 1}, {-2, {0, 1}, 0}})};
  Cylinder back = cylinder_from_json(cylinder_to_json(c));
  CHECK(back.level == 1);
  CHECK(back.set == c.set);
  CHECK_THROWS(cylinder_from_json(R"({"schema":"cfsim.cylinder/1","level":0,"boxes":[[0,"0","1",2]]})"));
  CHECK_THROWS(point_from_json(R"({"schema":"cfsim.cylinder/1"})"));
}

TEST_CASE("config files") {
  Config c = Config::parse("# comment\nr = 2, 3, 4\nseed=7   # trailing\n\nout_dir = out\n");
  CHECK(c.get("r") == "2, 3, 4");
  CHECK(parse_int_list(*c.get("r")) == std::vector<std::int64_t>{2, 3, 4});
  CHECK(parse_u64(*c.get("seed")) == 7);
  CHECK(c.missing({"r", "seed", "level"}) == std::vector<std::string>{"level"});
  CHECK(c.get_or("level", "1") == "1");
  CHECK_THROWS(Config::parse("no equals sign"));
  CHECK_THROWS(Config::parse(" = 3"));
  CHECK_THROWS(parse_int_list("1,x"));
  CHECK_THROWS(parse_u64("-1"));
}
