#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <utility>

#include "cfsim/rational.hpp"

namespace cfsim {

// Finite probability distribution with exact masses. Atom must be ordered.
template <class Atom>
class DiscreteDist {
 public:
  using Map = std::map<Atom, Rational>;

  DiscreteDist() = default;

  // Throws unless masses are nonnegative and sum to exactly 1. Zero masses are dropped.
  explicit DiscreteDist(Map mass) : mass_(std::move(mass)) {
    Rational total = 0;
    for (auto it = mass_.begin(); it != mass_.end();) {
      if (it->second < 0) throw std::invalid_argument("negative probability mass");
      total += it->second;
      it = it->second == 0 ? mass_.erase(it) : std::next(it);
    }
    if (total != 1) throw std::invalid_argument("masses do not sum to 1");
  }

  static DiscreteDist uniform(std::span<const Atom> atoms) {
    if (atoms.empty()) throw std::invalid_argument("uniform over empty set");
    Map m;
    for (const auto& a : atoms) m[a] = 0;
    Rational w(1, static_cast<unsigned long>(m.size()));
    for (auto& kv : m) kv.second = w;
    return DiscreteDist(std::move(m));
  }

  // dist_{y in Y} s(y): each of the N samples carries mass 1/N.
  static DiscreteDist empirical(std::span<const Atom> samples) {
    if (samples.empty()) throw std::invalid_argument("empirical distribution of no samples");
    Map m;
    for (const auto& a : samples) m[a] += 1;
    Rational n(static_cast<long>(samples.size()));
    for (auto& kv : m) kv.second /= n;
    return DiscreteDist(std::move(m));
  }

  static DiscreteDist point_mass(const Atom& a) { return DiscreteDist(Map{{a, Rational(1)}}); }

  const Map& masses() const { return mass_; }
  std::size_t support_size() const { return mass_.size(); }

  Rational operator()(const Atom& a) const {
    auto it = mass_.find(a);
    return it == mass_.end() ? Rational(0) : it->second;
  }

 private:
  Map mass_;
};

// sum over atoms of |d1 - d2|, in [0, 2].
template <class Atom>
Rational dist_l1(const DiscreteDist<Atom>& d1, const DiscreteDist<Atom>& d2) {
  Rational total = 0;
  auto i = d1.masses().begin(), ie = d1.masses().end();
  auto j = d2.masses().begin(), je = d2.masses().end();
  while (i != ie || j != je) {
    if (j == je || (i != ie && i->first < j->first)) {
      total += i->second;
      ++i;
    } else if (i == ie || j->first < i->first) {
      total += j->second;
      ++j;
    } else {
      total += abs_of(i->second - j->second);
      ++i;
      ++j;
    }
  }
  return total;
}

// L1 distance from d to the uniform law on a universe of `universe_size`
// atoms that contains d's support. Used when the universe (e.g. D_n x D_n)
// is far too large to materialise.
template <class Atom>
Rational dist_l1_to_uniform(const DiscreteDist<Atom>& d, const Integer& universe_size) {
  if (universe_size < static_cast<long>(d.support_size()))
    throw std::invalid_argument("universe smaller than support");
  Rational u(Integer(1), universe_size);
  u.canonicalize();
  Rational total = 0;
  for (const auto& kv : d.masses()) total += abs_of(kv.second - u);
  total += Rational(universe_size - static_cast<long>(d.support_size())) * u;
  return total;
}

template <class Atom, class F>
auto pushforward(const DiscreteDist<Atom>& d, F&& f) {
  using Image = std::decay_t<decltype(f(std::declval<const Atom&>()))>;
  typename DiscreteDist<Image>::Map m;
  for (const auto& kv : d.masses()) m[f(kv.first)] += kv.second;
  return DiscreteDist<Image>(std::move(m));
}

}  // namespace cfsim
