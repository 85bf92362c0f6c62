#include "immiscible/float16.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "immiscible/errors.hpp"

namespace immiscible::fp16 {

std::uint16_t to_bits(double x) {
  if (std::isnan(x)) throw RangeError("NaN has no binary16 quantization");
  const std::uint16_t sign = std::signbit(x) ? 0x8000 : 0;
  const double a = std::fabs(x);
  if (a > kMax) throw RangeError("value " + std::to_string(x) + " exceeds binary16 range");

  if (a < 0x1p-14) {
    // Scaling by a power of two is exact, so nearbyint sees the true value
    // and applies the default round-half-even mode.
    const auto q = static_cast<std::uint16_t>(std::nearbyint(a * 0x1p24));
    return sign | q;  // q == 0x400 is the smallest normal, encoded correctly
  }
  // Normal range: keep the top 10 of the 52 fraction bits, ties to even.
  const auto u = std::bit_cast<std::uint64_t>(a);
  int exponent = static_cast<int>(u >> 52) - 1023;
  const std::uint64_t frac = u & ((std::uint64_t{1} << 52) - 1);
  std::uint64_t keep = frac >> 42;
  const std::uint64_t rest = frac & ((std::uint64_t{1} << 42) - 1);
  constexpr std::uint64_t kHalfway = std::uint64_t{1} << 41;
  if (rest > kHalfway || (rest == kHalfway && (keep & 1))) ++keep;
  if (keep == 0x400) {
    keep = 0;
    ++exponent;
  }
  return static_cast<std::uint16_t>(sign | ((exponent + 15) << 10) | keep);
}

double from_bits(std::uint16_t bits) {
  const std::uint64_t sign = static_cast<std::uint64_t>(bits & 0x8000) << 48;
  const int exponent = (bits >> 10) & 0x1f;
  const std::uint64_t mant = bits & 0x3ff;
  if (exponent == 0) {
    const double v = static_cast<double>(mant) * 0x1p-24;
    return sign ? -v : v;
  }
  if (exponent == 31) {
    const double v = mant == 0 ? HUGE_VAL : NAN;
    return sign ? -v : v;
  }
  return std::bit_cast<double>(sign | (static_cast<std::uint64_t>(exponent - 15 + 1023) << 52) | (mant << 42));
}

}  // namespace immiscible::fp16
