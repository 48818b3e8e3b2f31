#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfsim/boxset.hpp"
#include "cfsim/dist.hpp"
#include "cfsim/exec.hpp"
#include "cfsim/group.hpp"
#include "cfsim/rational.hpp"
#include "cfsim/rng.hpp"

namespace cfsim {

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------------ params

// Cut counts r_0..r_{N-1} and the derived sequences
//   a~_0 = 1,  a_n = (2 r_{n-1} + 1) a~_{n-1},  b_n = (2n - 1) a~_{n-1},
//   a~_n = a_n + b_n + n.
// Level 0 uses a_0 = 1, b_0 = 0 (so a~_0 = a_0 + b_0 + 0) and F_0 = F~_0.
struct TowerParams {
  std::vector<std::int64_t> r;
  std::vector<std::int64_t> a;
  std::vector<std::int64_t> b;
  std::vector<std::int64_t> atilde;

  // Number of spacer levels N; level sets exist for 0..N.
  int depth() const { return static_cast<int>(r.size()); }

  Rect F(int n) const { return Rect::centered(a.at(n)); }
  Rect S(int n) const;
  Rect Ftilde(int n) const { return Rect::centered(atilde.at(n)); }

  // n^4 / r_n for n = 0..N-1. The construction wants these to tend to 0.
  std::vector<Rational> growth_diagnostics() const;
};

// Throws std::invalid_argument on an empty or non-increasing sequence.
TowerParams build_params(std::span<const std::int64_t> r_seq);

struct LevelSets {
  int n = 0;
  Rect F, S, Ftilde;
  std::int64_t h_radius = 0;  // H_n = {-r_n..r_n}^2 (only for n < N)
  std::int64_t i_radius = 0;  // I_n = {-n..n}^2
  bool s_in_f = false;
  bool fs_equals_sf = false;
  bool fs_in_ftilde = false;
};

LevelSets build_level_sets(const TowerParams& p, int n);

// S_{n+1} = ⊔_{h∈I_n} F~_n phi_n(h) (grid = I) or F_{n+1} = ⊔_{h∈H_n} F~_n phi_n(h) (grid = H).
enum class TilingGrid { I, H };

struct TilingReport {
  std::size_t copies = 0;
  bool disjoint = false;
  bool equals_target = false;
  bool left_right_agree = false;
  Rational measure;
  Rational symdiff_measure;
};

TilingReport verify_tiling(const TowerParams& p, int n, TilingGrid grid);

// ------------------------------------------------------------------ D_n

// D_n = {(a, k/n^2, m) : a ∈ (-b_n, b_n]_Z, k ∈ (-n^2 b_n, n^2 b_n]_Z, m ∈ Z_2}.
// Points are addressed by index; the set is never materialised unless asked.
// Level 0 uses the two-point alphabet {(0,0,0), (0,0,1)}.
class DiracComb {
 public:
  DiracComb() = default;
  DiracComb(int n, std::int64_t b_n);

  int level() const { return n_; }
  std::uint64_t size() const { return size_; }
  std::int64_t half_width() const { return b_; }       // b_n
  std::int64_t k_half() const { return k_half_; }      // n^2 b_n
  std::int64_t denominator() const { return q_; }      // n^2

  GroupElement point(std::uint64_t idx) const;
  int level_of(std::uint64_t idx) const { return static_cast<int>(idx & 1U); }
  std::uint64_t index_of(const GroupElement& g) const;  // throws if g ∉ D_n

  std::vector<GroupElement> enumerate(std::uint64_t limit = 50'000'000) const;

 private:
  int n_ = 0;
  std::int64_t b_ = 0;
  std::int64_t k_half_ = 0;
  std::int64_t q_ = 1;
  std::uint64_t size_ = 0;
};

DiracComb dirac_comb(const TowerParams& p, int n);

// ------------------------------------------------------------------ s_n, C_{n+1}

class SpacerMap {
 public:
  SpacerMap() = default;
  SpacerMap(int n, std::uint64_t seed, std::int64_t radius, std::int64_t atilde, DiracComb comb,
            std::vector<std::uint64_t> index);

  int level() const { return n_; }
  std::uint64_t seed() const { return seed_; }
  std::int64_t radius() const { return radius_; }
  std::int64_t atilde() const { return atilde_; }
  const DiracComb& comb() const { return comb_; }
  const std::vector<std::uint64_t>& indices() const { return index_; }

  std::size_t grid_size() const { return index_.size(); }
  bool in_grid(GridPoint h) const;
  std::size_t flat(GridPoint h) const;
  GridPoint grid_point(std::size_t k) const;

  std::uint64_t index_at(GridPoint h) const { return index_[flat(h)]; }
  GroupElement s(GridPoint h) const { return comb_.point(index_at(h)); }
  // c_{n+1}(h) = s_n(h) phi_n(h)
  GroupElement c(GridPoint h) const;
  // C_{n+1} in row-major order of H_n.
  std::vector<GroupElement> spacer_set() const;

 private:
  int n_ = 0;
  std::uint64_t seed_ = 0;
  std::int64_t radius_ = 0;
  std::int64_t atilde_ = 1;
  DiracComb comb_;
  std::vector<std::uint64_t> index_;
};

// s_n uniform i.i.d. over D_n, one draw per grid point of H_n.
SpacerMap sample_spacer_map(const TowerParams& p, int n, std::uint64_t seed);
// Rebuild from an explicit mapping (replay).
SpacerMap spacer_map_from_indices(const TowerParams& p, int n, std::uint64_t seed, std::vector<std::uint64_t> index);
// s_n(h) = fn(h); used by tests for hand-made maps.
template <class Fn>
SpacerMap spacer_map_from_function(const TowerParams& p, int n, Fn&& fn);

// F_n C_{n+1} as a box set, plus whether the copies were disjoint.
SpreadResult spacer_image(const TowerParams& p, const SpacerMap& m);

// ------------------------------------------------------------------ xi_n

// Finite partition of F_n into boxes, stored per column (eps, i) as sorted
// cut points. Built from the 1/n grid, refined by all A c (A ∈ xi_{n-1},
// c ∈ C_n) and closed under inversion wherever the inverse lies in F_n.
class XiPartition {
 public:
  int level() const { return n_; }
  std::size_t atom_count() const;
  std::vector<Box> atoms() const;
  bool is_measurable(const BoxSet& s) const;
  // Union of `k` distinct random atoms.
  BoxSet random_union(Rng& rng, std::size_t k) const;
  const std::map<std::pair<int, std::int64_t>, std::vector<Rational>>& cuts() const { return cuts_; }

 private:
  friend XiPartition xi_partition(const TowerParams&, int, const XiPartition*, const SpacerMap*, std::size_t);
  int n_ = 0;
  std::map<std::pair<int, std::int64_t>, std::vector<Rational>> cuts_;
};

inline constexpr std::size_t kDefaultAtomBudget = 4'000'000;

// Throws BudgetExceeded when the partition would exceed `atom_budget` atoms.
XiPartition xi_partition(const TowerParams& p, int n, const XiPartition* prev = nullptr,
                         const SpacerMap* prev_map = nullptr, std::size_t atom_budget = kDefaultAtomBudget);

// ------------------------------------------------------------------ certificates

struct BalanceReport {
  int n = 0;
  std::int64_t level0 = 0;
  std::int64_t level1 = 0;
  Rational deviation;                 // || dist π3∘s_n − κ_{Z2} ||_1
  std::optional<Rational> threshold;  // 1/n, absent at n = 0
  bool pass = false;
};

BalanceReport certify_balanced(const SpacerMap& m);

struct DjlemRow {
  std::int64_t N = 0;
  GridPoint h;
  GridPoint hp;
  Rational distance;
};

struct DjlemReport {
  int n = 0;
  Rational threshold;
  Rational max_distance;
  bool pass = false;
  bool exhaustive = false;
  std::vector<DjlemRow> rows;
  std::vector<std::string> notices;
};

// All admissible window lengths N with r_n/n^2 < N <= 2 r_n + 1.
std::vector<std::int64_t> default_djlem_lengths(const SpacerMap& m);
// L1 distance of dist_{0<=t<N}(s(h+(t,0)), s(h'+(t,0))) to κ_D × κ_D.
Rational djlem_distance(const SpacerMap& m, std::int64_t N, GridPoint h, GridPoint hp);
// Samples up to pair_budget unordered pairs per N (all of them when that covers the set).
DjlemReport certify_djlem(const SpacerMap& m, std::uint64_t pair_budget, std::span<const std::int64_t> lengths,
                          std::uint64_t seed, Exec exec = Exec::parallel);

struct DiscrTerms {
  Rational lhs;  // ∫ f dκ_D dκ_D
  Rational rhs;  // λ(S)^{-2} ∫ f dλ dλ
  Rational difference() const { return abs_of(lhs - rhs); }
};

// Both sides of the comb approximation for f(x,y) = λ(A'x ∩ B'y)/λ(F_n),
// with A' = Ag and B' = Bh already formed.
DiscrTerms discr_meas_terms(const BoxSet& ag, const BoxSet& bh, const DiracComb& comb, const Rational& lambda_f);

struct DiscrSample {
  BoxSet a;
  BoxSet b;
  GroupElement g;
  GroupElement h;
};

struct DiscrRow {
  std::size_t sample = 0;
  DiscrTerms terms;
};

struct DiscrReport {
  int n = 0;
  Rational threshold;
  Rational max_difference;
  bool pass = false;
  std::size_t evaluated = 0;
  std::size_t discarded = 0;
  std::vector<DiscrRow> rows;
  std::vector<std::string> notices;
};

// The side condition A g S_n ⊆ F_n.
bool discr_side_condition(const TowerParams& p, int n, const BoxSet& a, const GroupElement& g);

// Random samples (A, B unions of atoms; g, h near the identity). With
// exhaustive = true, every ordered atom pair with g = h = e is added.
DiscrReport certify_discr_meas(const TowerParams& p, int n, const XiPartition& xi, std::size_t sample_budget,
                               std::uint64_t seed, bool exhaustive, Exec exec = Exec::parallel);
DiscrReport certify_discr_meas(const TowerParams& p, int n, std::span<const DiscrSample> samples,
                               Exec exec = Exec::parallel);

// ------------------------------------------------------------------ (C,F) conditions

struct CfLevelReport {
  int n = 0;  // checks F_n C_{n+1} ⊆ F_{n+1}
  std::size_t spacer_count = 0;
  std::size_t distinct = 0;
  bool cf2 = false;
  bool cf3 = false;
  bool cf4 = false;
};

struct CfFailure {
  int n = 0;
  std::string condition;
  std::string detail;
};

struct CfReport {
  std::vector<CfLevelReport> levels;
  std::vector<CfFailure> failures;
  bool ok() const { return failures.empty(); }
};

CfReport verify_cf_conditions(const TowerParams& p, std::span<const SpacerMap> maps);

struct GapLevel {
  int n = 0;
  bool holds = false;
  std::int64_t int_excess = 0;  // how far g F_n C_{n+1} sticks out of F_{n+1}
  Rational real_excess;
};

struct GapReport {
  GroupElement g;
  std::vector<GapLevel> levels;
  std::optional<int> least_level;  // least m with containment for all built n >= m
};

GapReport cfgap_query(const TowerParams& p, std::span<const SpacerMap> maps, const GroupElement& g);

// ------------------------------------------------------------------ main lemma windows, cores

struct MainLemWindows {
  GroupElement f;
  int alpha = 0;
  BoxSet lminus;
  BoxSet lplus;
  BoxSet fs;
  bool lower_inclusion = false;
  bool upper_inclusion = false;
  Rational symdiff_ratio;  // λ(fS_n △ L⁻_n) / λ(S_n)
  Rational ratio_bound;    // (|I_n| − |I_{n−2}|)/|I_{n−1}|
};

// f = f' phi_{n-1}(h). Throws std::invalid_argument if f' ∉ F~_{n-1} or n < 2.
MainLemWindows mainlem_windows(const TowerParams& p, int n, const GroupElement& fprime, GridPoint h);

// F°_n = {f ∈ F_n : f S_n S_n^{-1} ⊆ F_n}, mod null.
Rect core_set(const TowerParams& p, int n);
// Exact pointwise version of the defining containment.
bool core_contains(const TowerParams& p, int n, const GroupElement& f);

// ------------------------------------------------------------------ template impl

template <class Fn>
SpacerMap spacer_map_from_function(const TowerParams& p, int n, Fn&& fn) {
  DiracComb comb = dirac_comb(p, n);
  const std::int64_t r = p.r.at(n);
  std::vector<std::uint64_t> idx;
  idx.reserve(static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)));
  for (std::int64_t i = -r; i <= r; ++i)
    for (std::int64_t j = -r; j <= r; ++j) idx.push_back(comb.index_of(fn(GridPoint{i, j})));
  return spacer_map_from_indices(p, n, 0, std::move(idx));
}

}  // namespace cfsim
