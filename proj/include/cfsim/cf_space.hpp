#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cfsim/boxset.hpp"
#include "cfsim/group.hpp"
#include "cfsim/rational.hpp"
#include "cfsim/rng.hpp"
#include "cfsim/tower.hpp"

namespace cfsim {

// Raised when an operation needs more expansion digits (or a deeper tower)
// than are available. `needed` is the level that would have to be reached.
class NeedsDeeperTail : public std::runtime_error {
 public:
  NeedsDeeperTail(const std::string& what, int needed) : std::runtime_error(what), needed_(needed) {}
  int needed() const { return needed_; }

 private:
  int needed_;
};

// x = (f_n, c_{n+1}(h_n), c_{n+2}(h_{n+1}), ...), truncated after digits.size() digits.
struct PointExpansion {
  int level = 0;
  GroupElement f;
  std::vector<GridPoint> digits;  // digits[k] = h_{level+k} ∈ H_{level+k}

  int reach() const { return level + static_cast<int>(digits.size()); }
};

bool operator==(const PointExpansion& x, const PointExpansion& y);
// Lexicographic on (level, f, digits).
bool operator<(const PointExpansion& x, const PointExpansion& y);

struct Cylinder {
  int level = 0;
  BoxSet set;  // ⊆ F_level
};

// Everything needed to evaluate measures at finite depth N: the tower, the
// spacer maps s_0..s_{N-1} and the weights w_n = μ_N(X_n).
class MeasureContext {
 public:
  MeasureContext(TowerParams params, std::vector<SpacerMap> maps);

  const TowerParams& params() const { return params_; }
  const std::vector<SpacerMap>& maps() const { return maps_; }
  const SpacerMap& map(int n) const { return maps_.at(static_cast<std::size_t>(n)); }
  int depth() const { return static_cast<int>(maps_.size()); }

  const Rational& weight(int n) const { return weights_.at(static_cast<std::size_t>(n)); }
  const std::vector<Rational>& weights() const { return weights_; }
  // Hull of F_n C_{n+1}, for the promotion criterion g F_n C_{n+1} ⊆ F_{n+1}.
  const Hull& image_hull(int n) const { return hulls_.at(static_cast<std::size_t>(n)); }
  // C_{n+1} in row-major order of H_n.
  const std::vector<GroupElement>& spacers(int n) const { return spacers_.at(static_cast<std::size_t>(n)); }

 private:
  TowerParams params_;
  std::vector<SpacerMap> maps_;
  std::vector<Rational> weights_;
  std::vector<Hull> hulls_;
  std::vector<std::vector<GroupElement>> spacers_;
};

// Builds maps for levels 0..depth-1 from one master seed.
MeasureContext make_context(const TowerParams& p, std::uint64_t seed);

// ------------------------------------------------------------------ points

void validate_point(const MeasureContext& ctx, const PointExpansion& x);

PointExpansion embed_point(const MeasureContext& ctx, const PointExpansion& x);
// Embeds until x sits at `level`.
PointExpansion normalize(const MeasureContext& ctx, const PointExpansion& x, int level);
// Equal as points of X: compared at the deeper of the two base levels.
bool same_point(const MeasureContext& ctx, const PointExpansion& x, const PointExpansion& y);

// g F_n C_{n+1} ⊆ F_{n+1}.
bool promotion_criterion(const MeasureContext& ctx, const GroupElement& g, int n);

// T_g x. Embeds x until g f_k ∈ F_k and returns (g f_k, h_k, ...). This agrees
// in normal form with (g f_m c_{m+1}, ...) at any level m where the promotion
// criterion holds, and needs no more digits than that rule.
PointExpansion act(const MeasureContext& ctx, const GroupElement& g, const PointExpansion& x);

// S_b x = T_{(0,b,1)} x.
PointExpansion involution_apply(const MeasureContext& ctx, const Rational& b, const PointExpansion& x);

// The smaller (in normal form at a common level) of x and S_b x.
PointExpansion factor_key(const MeasureContext& ctx, const Rational& b, const PointExpansion& x);

// f uniform on a 2^-20 sub-grid of F_level's real coordinate; digits uniform on
// H_k, or on H_k^- = [-(1-1/k^2) r_k, (1-1/k^2) r_k]^2 when `conditioned`.
PointExpansion sample_point(const MeasureContext& ctx, int level, Rng& rng, bool conditioned = false);

// f = u phi_{n-1}(h) with u ∈ F~_{n-1}; then f = f' c_n(h) with f' = u s(h)^{-1}.
// Returns (f', h) when f ∈ F_{n-1} C_n, nothing otherwise.
std::optional<std::pair<GroupElement, GridPoint>> pull_back(const MeasureContext& ctx, const GroupElement& f, int n);

// x ∈ [A]_n. Works whichever of x.level and n is larger.
bool in_cylinder(const MeasureContext& ctx, const PointExpansion& x, const Cylinder& c);

// ------------------------------------------------------------------ cylinders

void validate_cylinder(const MeasureContext& ctx, const Cylinder& c);

// μ([A]_n) = w_n λ(A)/λ(F_n)
Rational cylinder_measure(const MeasureContext& ctx, const Cylinder& c);

// [A]_n = [A C_{n+1} ... C_m]_m
Cylinder refine_cylinder(const MeasureContext& ctx, const Cylinder& c, int to_level);

// λ(Y ∩ Z C_{lo+1} ... C_hi) for Y ⊆ F_hi, Z ⊆ F_lo, without materialising the
// refined Z: Y is pulled back window by window.
Rational refined_overlap(const MeasureContext& ctx, const BoxSet& y, int hi, const BoxSet& z, int lo);

// μ([A]_n ∩ [B]_m) for any n, m.
Rational cylinder_overlap(const MeasureContext& ctx, const Cylinder& a, const Cylinder& b);

struct IntersectResult {
  Rational value;        // exact contribution of the transported mass
  Rational unreachable;  // μ-mass of [A]_n whose image T_g needs levels beyond the depth
  int deepest = 0;       // deepest level used
  bool exact() const { return unreachable == 0; }
};

// μ(T_g[A]_n ∩ [B]_m). Pieces of A are refined until gA' ⊆ F_k; mass that
// stays outside at level N is reported as unreachable (the true value lies in
// [value, value + unreachable]). When μ([B]_m) = 1 the unreachable mass is
// credited, as every point lies in [B]_m.
IntersectResult intersect_measure(const MeasureContext& ctx, const GroupElement& g, const Cylinder& a,
                                  const Cylinder& b);

}  // namespace cfsim
