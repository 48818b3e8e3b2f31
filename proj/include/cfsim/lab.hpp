#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cfsim/cf_space.hpp"
#include "cfsim/exec.hpp"
#include "cfsim/tower.hpp"

namespace cfsim {

inline constexpr const char* kReportSchema = "cfsim.report/1";

// ------------------------------------------------------------------ reports

struct Cell {
  enum class Kind { text, integer, rational };
  Kind kind = Kind::text;
  std::string text;
  std::int64_t integer = 0;
  Rational value;

  static Cell of(std::string s) { return {Kind::text, std::move(s), 0, 0}; }
  static Cell of(const char* s) { return of(std::string(s)); }
  static Cell of(std::int64_t v) { return {Kind::integer, {}, v, 0}; }
  static Cell of(int v) { return of(static_cast<std::int64_t>(v)); }
  static Cell of(std::size_t v) { return of(static_cast<std::int64_t>(v)); }
  static Cell of(bool v) { return of(std::string(v ? "true" : "false")); }
  static Cell of(Rational q) { return {Kind::rational, {}, 0, std::move(q)}; }
};

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Every decimal in the rendered output is derived from a stored exact rational.
struct ExperimentReport {
  std::string experiment;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> params;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::pair<std::string, Cell>> summary;
  std::vector<Check> checks;
  std::vector<std::string> notices;

  bool ok() const;
  void add_check(std::string name, bool pass, std::string detail = {});
  const Cell* find_summary(const std::string& key) const;
};

// JSON document: {"schema", "experiment", "seed", "params", "columns", "rows", "summary", "checks", "notices"}.
std::string to_json(const ExperimentReport& r);
// One row per table row; a rational column `c` becomes `c` (exact "p/q") and `c_dec` (12 digits).
std::string to_csv(const ExperimentReport& r);
std::string format_params(const TowerParams& p);

// ------------------------------------------------------------------ averaging windows

struct AveragingWindow {
  int n = 0;
  std::int64_t k_half = 0;  // K_n = [-k_half, k_half]
  std::int64_t j_half = 0;  // J_n = [-j_half, j_half]
  std::int64_t atilde = 0;
  std::vector<std::int64_t> phi;  // K_n + 2 a~_n J_n, sorted, deduplicated
};

// Endpoints floor(a_n/n^2) and floor(r_n/n^2). Needs 1 <= n < depth.
AveragingWindow averaging_window(const TowerParams& p, int n);

struct WindowCheck {
  int n = 0;               // compares Φ_{n+1} with Φ_1..Φ_n
  std::size_t sumset = 0;  // |Φ_{n+1} + ∪_{m<=n} Φ_m|
  std::size_t bound = 0;   // 3 |Φ_{n+1}|
  bool shulman = false;
  bool arithmetic = false;  // a_n/n^2 + 2 a~_n r_n/n^2 < 2 a_{n+1}/(n+1)^2
  Rational arithmetic_lhs;
  Rational arithmetic_rhs;
};

std::vector<WindowCheck> check_windows(const TowerParams& p, std::span<const AveragingWindow> windows);

// ------------------------------------------------------------------ experiments

struct CylinderPair {
  Cylinder a;
  Cylinder b;
  std::string label;
};

// g_n = 2 a~_n for n = 1..depth-1 (φ_n(1,0) acting as a power of (1,0,0)).
std::vector<std::int64_t> designated_mixing_sequence(const MeasureContext& ctx);

ExperimentReport mixing_scan(const MeasureContext& ctx, std::span<const std::int64_t> g_values,
                             std::span<const CylinderPair> pairs, Exec exec = Exec::parallel);

struct LemwmResult {
  Rational direct;       // Σ_{h∈H'} μ(T_g [A° c(h)]_{n+1} ∩ [B°]_n)
  Rational correlation;  // w_n |H|^{-1} Σ_{h∈H'} λ_{F_n}(A° s(h) ∩ B° s(h+h0))
  Rational excluded;     // μ([A]_n) minus the mass of the pieces used
  Rational excluded_bound;
  std::size_t used_pieces = 0;
  bool equal() const { return direct == correlation; }
};

// h0 = (1,0), g = φ_n(h0). Needs n + 1 <= depth.
LemwmResult lemwm_evaluate(const MeasureContext& ctx, int n, const BoxSet& a, const BoxSet& b,
                           Exec exec = Exec::parallel);

ExperimentReport lemwm_crosscheck(const MeasureContext& ctx, int n, std::span<const std::pair<BoxSet, BoxSet>> pairs,
                                  Exec exec = Exec::parallel);

struct JoiningSetup {
  PointExpansion x;
  PointExpansion y;
  std::optional<GroupElement> k;  // candidate off-diagonal T_k
};

// y shares x's digits from `level` on, with its own f'; k = f' f^{-1} at that level.
JoiningSetup paired_points(const MeasureContext& ctx, const PointExpansion& x, int level, Rng& rng);

ExperimentReport joining_average(const MeasureContext& ctx, const JoiningSetup& setup,
                                 std::span<const AveragingWindow> windows, std::span<const Cylinder> cells,
                                 Exec exec = Exec::parallel);

enum class TechlemMode { exact, montecarlo };

inline constexpr double kHoeffdingDelta = 1e-6;

struct TechlemResult {
  TechlemMode mode = TechlemMode::exact;
  Rational lhs;  // ∫_{S×S} λ(Ax ∩ By)
  Rational rhs;  // ∫_{A×B} λ(aS ∩ bS)
  // Monte Carlo only: half widths of the two-sided Hoeffding intervals at level kHoeffdingDelta.
  double lhs_halfwidth = 0;
  double rhs_halfwidth = 0;
  std::size_t samples = 0;
  std::string notice;
};

TechlemResult techlem_exact(const BoxSet& a, const BoxSet& b, const BoxSet& s);
TechlemResult techlem_montecarlo(const BoxSet& a, const BoxSet& b, const BoxSet& s, std::size_t samples,
                                 std::uint64_t seed);
// Exact mode falls back to Monte Carlo (with a notice) beyond box_budget quadruples.
TechlemResult techlem_check(const BoxSet& a, const BoxSet& b, const BoxSet& s, TechlemMode mode,
                            std::size_t budget, std::uint64_t seed, std::size_t box_budget = 2'000'000);

// Random small box set: 1..max_boxes boxes, integer column in [-span, span], endpoints on a 1/den grid.
BoxSet random_small_boxset(Rng& rng, int max_boxes, std::int64_t span, std::int64_t den);

struct BalancedRow {
  Rational lambda_a;
  Rational level0;
  Rational level1;
  Rational predicted;  // |λ(A*⁰) − λ(A*¹)| · |n0 − n1|
};

ExperimentReport balanced_product_check(const MeasureContext& ctx, int n, std::size_t samples, std::uint64_t seed,
                                        Exec exec = Exec::parallel);

ExperimentReport mainlem_density_check(const MeasureContext& ctx, int n, std::size_t samples, std::uint64_t seed,
                                       Exec exec = Exec::parallel);

// ------------------------------------------------------------------ certification bundles

struct CertifyOptions {
  int level = 1;
  std::uint64_t seed = 1;
  bool exhaustive = false;
  std::uint64_t pair_budget = 2000;
  std::size_t sample_budget = 50;
};

ExperimentReport certify_level(const TowerParams& p, const CertifyOptions& opt, Exec exec = Exec::parallel);

ExperimentReport build_report(const TowerParams& p, std::span<const SpacerMap> maps);

ExperimentReport factor_check(const MeasureContext& ctx, std::span<const Rational> b_values, std::size_t samples,
                              std::uint64_t seed, Exec exec = Exec::parallel);

}  // namespace cfsim
