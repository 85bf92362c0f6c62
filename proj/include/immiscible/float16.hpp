#pragma once

#include <cstdint>

namespace immiscible::fp16 {

// Largest finite binary16 value.
inline constexpr double kMax = 65504.0;

// IEEE 754 binary16 encoding of `x`, round-to-nearest-even. Subnormals are
// produced for |x| < 2^-14. Throws RangeError when |x| > kMax or x is NaN.
std::uint16_t to_bits(double x);

// Exact widening of a binary16 encoding (infinities and NaN included).
double from_bits(std::uint16_t bits);

// Nearest binary16 value of `x`, widened back to double.
inline double round(double x) { return from_bits(to_bits(x)); }

}  // namespace immiscible::fp16
