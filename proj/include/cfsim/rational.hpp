#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <gmpxx.h>

namespace cfsim {

// Arbitrary precision rational. Every real coordinate, length and measure in
// the library is one of these; nothing is ever rounded.
using Rational = mpq_class;
using Integer = mpz_class;

Rational make_rational(std::int64_t num, std::int64_t den = 1);
Rational make_rational(const Integer& num, const Integer& den);

// "p" for integers, "p/q" otherwise (lowest terms, q > 0).
std::string to_exact_string(const Rational& q);

// Accepts "p", "-p", "p/q". Throws std::invalid_argument on anything else.
Rational parse_rational(std::string_view text);

// Fixed-point rendering with `digits` fractional digits, rounded half away
// from zero. Deterministic: computed with integer arithmetic only.
std::string to_decimal_string(const Rational& q, int digits = 12);

Integer floor_of(const Rational& q);
Integer ceil_of(const Rational& q);

// Converts an Integer known to fit; throws std::overflow_error otherwise.
std::int64_t to_int64(const Integer& z);

inline Rational abs_of(const Rational& q) { return q < 0 ? Rational(-q) : q; }

}  // namespace cfsim
