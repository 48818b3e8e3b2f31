#include "cfsim/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cfsim {

namespace {

using ojson = nlohmann::ordered_json;

ojson element_json(const GroupElement& g) { return {{"x", g.x}, {"a", to_exact_string(g.a)}, {"eps", g.eps}}; }

GroupElement element_from(const ojson& j) {
  const int eps = j.at("eps").get<int>();
  if (eps != 0 && eps != 1) throw std::invalid_argument("eps must be 0 or 1");
  return GroupElement(j.at("x").get<std::int64_t>(), parse_rational(j.at("a").get<std::string>()), eps);
}

ojson parse_doc(const std::string& text, const char* schema) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw std::invalid_argument(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("schema", "") != schema)
    throw std::invalid_argument(std::string("expected schema ") + schema);
  return j;
}

template <class F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const ojson::exception& e) {
    throw std::invalid_argument(std::string("bad document: ") + e.what());
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

std::string tower_to_json(const TowerParams& p, std::span<const SpacerMap> maps) {
  ojson j;
  j["schema"] = kTowerSchema;
  j["r"] = p.r;
  j["a"] = p.a;
  j["b"] = p.b;
  j["atilde"] = p.atilde;
  ojson ms = ojson::array();
  for (const auto& m : maps) ms.push_back({{"level", m.level()}, {"seed", m.seed()}, {"indices", m.indices()}});
  j["maps"] = ms;
  return j.dump() + "\n";
}

LoadedTower tower_from_json(const std::string& text) {
  const ojson j = parse_doc(text, kTowerSchema);
  return guarded([&] {
    LoadedTower out;
    const auto r = j.at("r").get<std::vector<std::int64_t>>();
    out.params = build_params(r);
    if (j.contains("a") && j["a"].get<std::vector<std::int64_t>>() != out.params.a)
      throw std::invalid_argument("stored a_n disagree with the recurrence");
    if (j.contains("b") && j["b"].get<std::vector<std::int64_t>>() != out.params.b)
      throw std::invalid_argument("stored b_n disagree with the recurrence");
    if (j.contains("atilde") && j["atilde"].get<std::vector<std::int64_t>>() != out.params.atilde)
      throw std::invalid_argument("stored a~_n disagree with the recurrence");
    int expect = 0;
    for (const auto& m : j.value("maps", ojson::array())) {
      const int n = m.at("level").get<int>();
      if (n != expect++) throw std::invalid_argument("maps must be stored for levels 0, 1, 2, ...");
      if (n >= out.params.depth()) throw std::invalid_argument("map level beyond the depth");
      auto idx = m.at("indices").get<std::vector<std::uint64_t>>();
      const std::int64_t side = 2 * out.params.r[n] + 1;
      if (idx.size() != static_cast<std::size_t>(side * side)) throw std::invalid_argument("map has the wrong grid size");
      const DiracComb comb = dirac_comb(out.params, n);
      for (auto v : idx)
        if (v >= comb.size()) throw std::invalid_argument("spacer index outside D_n");
      out.maps.push_back(spacer_map_from_indices(out.params, n, m.at("seed").get<std::uint64_t>(), std::move(idx)));
    }
    return out;
  });
}

std::string point_to_json(const PointExpansion& x) {
  ojson j;
  j["schema"] = kPointSchema;
  j["level"] = x.level;
  j["f"] = element_json(x.f);
  ojson d = ojson::array();
  for (const auto& h : x.digits) d.push_back({h.i, h.j});
  j["digits"] = d;
  return j.dump() + "\n";
}

PointExpansion point_from_json(const std::string& text) {
  const ojson j = parse_doc(text, kPointSchema);
  return guarded([&] {
    PointExpansion x;
    x.level = j.at("level").get<int>();
    x.f = element_from(j.at("f"));
    for (const auto& d : j.at("digits")) x.digits.push_back({d.at(0).get<std::int64_t>(), d.at(1).get<std::int64_t>()});
    return x;
  });
}

std::string cylinder_to_json(const Cylinder& c) {
  ojson j;
  j["schema"] = kCylinderSchema;
  j["level"] = c.level;
  ojson boxes = ojson::array();
  for (const auto& b : c.set.boxes())
    boxes.push_back({b.i, to_exact_string(b.span.lo), to_exact_string(b.span.hi), static_cast<int>(b.eps)});
  j["boxes"] = boxes;
  return j.dump() + "\n";
}

Cylinder cylinder_from_json(const std::string& text) {
  const ojson j = parse_doc(text, kCylinderSchema);
  return guarded([&] {
    Cylinder c;
    c.level = j.at("level").get<int>();
    std::vector<Box> boxes;
    for (const auto& b : j.at("boxes")) {
      const int eps = b.at(3).get<int>();
      if (eps != 0 && eps != 1) throw std::invalid_argument("eps must be 0 or 1");
      boxes.push_back({b.at(0).get<std::int64_t>(),
                       Interval{parse_rational(b.at(1).get<std::string>()), parse_rational(b.at(2).get<std::string>())},
                       static_cast<std::uint8_t>(eps)});
    }
    c.set = BoxSet::from_boxes(std::move(boxes));
    return c;
  });
}

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    c.values_[key] = trim(line.substr(eq + 1));
  }
  return c;
}

Config Config::load(const std::string& path) { return parse(read_file(path)); }

std::optional<std::string> Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::get_or(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

std::vector<std::string> Config::missing(const std::vector<std::string>& required) const {
  std::vector<std::string> out;
  for (const auto& k : required)
    if (!has(k)) out.push_back(k);
  return out;
}

std::vector<std::int64_t> parse_int_list(const std::string& text) {
  std::vector<std::int64_t> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size())
      throw std::invalid_argument("not an integer list: " + text);
    out.push_back(v);
  }
  return out;
}

std::uint64_t parse_u64(const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size())
    throw std::invalid_argument("not an unsigned integer: " + text);
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace cfsim
