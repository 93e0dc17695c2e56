// Copyright 2026 The ldpcb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Scalar building blocks shared by every backend. The vector backends
// replicate these operation-for-operation; any change here must be mirrored
// in the vector code or the equivalence tests will fail.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>

#include "ldpcb/simd/kernels.hpp"

namespace ldpcb::simd::detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;
inline constexpr int kPhiloxRounds = 10;

struct Block {
  std::uint64_t a;
  std::uint64_t b;
};

// Philox4x32-10. Counter words: (block lo, block hi, sample lo, sample hi).
inline Block philox(StreamAddress addr, std::uint64_t block) {
  std::uint32_t x0 = static_cast<std::uint32_t>(block);
  std::uint32_t x1 = static_cast<std::uint32_t>(block >> 32);
  std::uint32_t x2 = static_cast<std::uint32_t>(addr.sample);
  std::uint32_t x3 = static_cast<std::uint32_t>(addr.sample >> 32);
  std::uint32_t k0 = static_cast<std::uint32_t>(addr.key);
  std::uint32_t k1 = static_cast<std::uint32_t>(addr.key >> 32);
  for (int round = 0; round < kPhiloxRounds; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * x0;
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * x2;
    const std::uint32_t y0 = static_cast<std::uint32_t>(p1 >> 32) ^ x1 ^ k0;
    const std::uint32_t y1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t y2 = static_cast<std::uint32_t>(p0 >> 32) ^ x3 ^ k1;
    const std::uint32_t y3 = static_cast<std::uint32_t>(p0);
    x0 = y0;
    x1 = y1;
    x2 = y2;
    x3 = y3;
    k0 += kPhiloxW0;
    k1 += kPhiloxW1;
  }
  return {static_cast<std::uint64_t>(x0) | (static_cast<std::uint64_t>(x1) << 32),
          static_cast<std::uint64_t>(x2) | (static_cast<std::uint64_t>(x3) << 32)};
}

inline constexpr std::uint64_t kOneBits = 0x3FF0000000000000ull;
// 1 - 2^-53; subtracting it from [1,2) lands on odd multiples of 2^-53.
inline constexpr double kUniformOffset = 1.0 - 0x1.0p-53;

inline double to_uniform(std::uint64_t v) {
  const double one_to_two = std::bit_cast<double>((v >> 12) | kOneBits);
  return one_to_two - kUniformOffset;
}

inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;
inline constexpr double kSqrt2 = 1.41421356237309514547;
inline constexpr std::uint64_t kMantissaMask = 0x000FFFFFFFFFFFFFull;
inline constexpr double kExpMagic = 0x1.0p52;
inline constexpr std::uint64_t kExpMagicBits = 0x4330000000000000ull;

// 2 * atanh(s) series coefficients 1/(2k+1), highest first.
inline constexpr double kLogCoeffs[] = {
    1.0 / 23.0, 1.0 / 21.0, 1.0 / 19.0, 1.0 / 17.0, 1.0 / 15.0, 1.0 / 13.0,
    1.0 / 11.0, 1.0 / 9.0,  1.0 / 7.0,  1.0 / 5.0,  1.0 / 3.0,  1.0};

// Natural log for positive normal inputs.
inline double log_positive(double x) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
  double exponent =
      (std::bit_cast<double>((bits >> 52) | kExpMagicBits) - kExpMagic) - 1023.0;
  double m = std::bit_cast<double>((bits & kMantissaMask) | kOneBits);
  if (m > kSqrt2) {
    m = m * 0.5;
    exponent = exponent + 1.0;
  }
  const double f = m - 1.0;
  const double s = f / (2.0 + f);
  const double z = s * s;
  double p = kLogCoeffs[0];
  for (std::size_t i = 1; i < std::size(kLogCoeffs); ++i) p = p * z + kLogCoeffs[i];
  const double r = (s + s) * p;
  return (exponent * kLn2Lo + r) + exponent * kLn2Hi;
}

inline constexpr double kHalfPi = 1.57079632679489655800e+00;

// Taylor coefficients for |x| <= pi/4, highest first.
inline constexpr double kSinCoeffs[] = {
    1.0 / 355687428096000.0,   // 1/17!
    -1.0 / 1307674368000.0,    // -1/15!
    1.0 / 6227020800.0,        // 1/13!
    -1.0 / 39916800.0,         // -1/11!
    1.0 / 362880.0,            // 1/9!
    -1.0 / 5040.0,             // -1/7!
    1.0 / 120.0,               // 1/5!
    -1.0 / 6.0,                // -1/3!
    1.0};
inline constexpr double kCosCoeffs[] = {
    -1.0 / 6402373705728000.0,  // -1/18!
    1.0 / 20922789888000.0,     // 1/16!
    -1.0 / 87178291200.0,       // -1/14!
    1.0 / 479001600.0,          // 1/12!
    -1.0 / 3628800.0,           // -1/10!
    1.0 / 40320.0,              // 1/8!
    -1.0 / 720.0,               // -1/6!
    1.0 / 24.0,                 // 1/4!
    -0.5,                       // -1/2!
    1.0};

inline double sin_poly(double x) {
  const double x2 = x * x;
  double p = kSinCoeffs[0];
  for (std::size_t i = 1; i < std::size(kSinCoeffs); ++i) p = p * x2 + kSinCoeffs[i];
  return x * p;
}

inline double cos_poly(double x) {
  const double x2 = x * x;
  double p = kCosCoeffs[0];
  for (std::size_t i = 1; i < std::size(kCosCoeffs); ++i) p = p * x2 + kCosCoeffs[i];
  return p;
}

// sin and cos of 2*pi*u for u in [0, 1).
inline void sincos_2pi(double u, double* s, double* c) {
  const double w = u * 4.0;
  const double q = std::nearbyint(w);
  const double x = (w - q) * kHalfPi;
  const double sx = sin_poly(x);
  const double cx = cos_poly(x);
  const int quadrant = static_cast<int>(q);
  double sv = (quadrant & 1) ? cx : sx;
  double cv = (quadrant & 1) ? sx : cx;
  if (quadrant & 2) sv = -sv;
  if ((quadrant + 1) & 2) cv = -cv;
  *s = sv;
  *c = cv;
}

inline double laplace_from_uniform(double u) {
  const bool lower = u < 0.5;
  const double w = lower ? (u + u) : ((1.0 - u) * 2.0);
  const double l = log_positive(w);
  return lower ? l : -l;
}

inline void box_muller(double u1, double u2, double* z0, double* z1) {
  const double r = std::sqrt(log_positive(u1) * -2.0);
  double s;
  double c;
  sincos_2pi(u2, &s, &c);
  *z0 = r * c;
  *z1 = r * s;
}

// Scalar tails used by every backend for the blocks that do not fill a lane.
inline void uniform_blocks(StreamAddress addr, std::uint64_t block, double* out,
                           std::size_t n) {
  for (std::size_t i = 0; i < n; i += 2, ++block) {
    const Block r = philox(addr, block);
    out[i] = to_uniform(r.a);
    if (i + 1 < n) out[i + 1] = to_uniform(r.b);
  }
}

inline void laplace_blocks(StreamAddress addr, std::uint64_t block, double* out,
                           std::size_t n) {
  for (std::size_t i = 0; i < n; i += 2, ++block) {
    const Block r = philox(addr, block);
    out[i] = laplace_from_uniform(to_uniform(r.a));
    if (i + 1 < n) out[i + 1] = laplace_from_uniform(to_uniform(r.b));
  }
}

inline void gaussian_blocks(StreamAddress addr, std::uint64_t block, double* out,
                            std::size_t n) {
  for (std::size_t i = 0; i < n; i += 2, ++block) {
    const Block r = philox(addr, block);
    double z0;
    double z1;
    box_muller(to_uniform(r.a), to_uniform(r.b), &z0, &z1);
    out[i] = z0;
    if (i + 1 < n) out[i + 1] = z1;
  }
}

}  // namespace ldpcb::simd::detail
