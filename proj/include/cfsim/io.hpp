#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfsim/cf_space.hpp"
#include "cfsim/tower.hpp"

namespace cfsim {

inline constexpr const char* kTowerSchema = "cfsim.tower/1";
inline constexpr const char* kPointSchema = "cfsim.point/1";
inline constexpr const char* kCylinderSchema = "cfsim.cylinder/1";

// Tower plus the spacer maps s_0..s_{k-1} (k may be 0). Maps are stored as
// D_n indices in row-major grid order, so a load replays them exactly.
std::string tower_to_json(const TowerParams& p, std::span<const SpacerMap> maps);
struct LoadedTower {
  TowerParams params;
  std::vector<SpacerMap> maps;
};
// Throws std::invalid_argument on schema mismatch, inconsistent recurrences or
// out-of-range indices.
LoadedTower tower_from_json(const std::string& text);

std::string point_to_json(const PointExpansion& x);
PointExpansion point_from_json(const std::string& text);

std::string cylinder_to_json(const Cylinder& c);
Cylinder cylinder_from_json(const std::string& text);

// "key = value" lines; '#' starts a comment; blank lines ignored.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  // Keys from `required` that are absent.
  std::vector<std::string> missing(const std::vector<std::string>& required) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::int64_t> parse_int_list(const std::string& text);
std::uint64_t parse_u64(const std::string& text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace cfsim
