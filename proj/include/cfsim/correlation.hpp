#pragma once

#include <cstdint>

#include "cfsim/boxset.hpp"
#include "cfsim/rational.hpp"

namespace cfsim {

// Closed-form interval cross-correlations.
//
// The overlap |(I1 + s) ∩ (I2 + t)| depends only on d = t - s and is a
// trapezoid in d. Integrating it against the (also trapezoidal) density of
// d gives a piecewise cubic, so Simpson's rule on each linear piece is exact.

// g(d) = |I1 ∩ (I2 + d)|
Rational shifted_overlap(const Interval& i1, const Interval& i2, const Rational& d);

// ∫_{s∈U} ∫_{t∈V} |(I1 + s) ∩ (I2 + t)| dt ds
Rational overlap_integral(const Interval& i1, const Interval& i2, const Interval& u, const Interval& v);

// Σ_{k1∈(k1lo,k1hi]} Σ_{k2∈(k2lo,k2hi]} |(I1 + k1/q) ∩ (I2 + k2/q)|
Rational overlap_lattice_sum(const Interval& i1, const Interval& i2, std::int64_t k1lo, std::int64_t k1hi,
                             std::int64_t k2lo, std::int64_t k2hi, std::int64_t q);

}  // namespace cfsim
