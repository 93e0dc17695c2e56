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

// Compiled with -mavx2 -mno-fma -ffp-contract=off. Every arithmetic step
// mirrors detail.hpp so results match the scalar table bit for bit.

#include <immintrin.h>

#include <cstddef>
#include <cstdint>

#include "detail.hpp"
#include "ldpcb/simd/kernels.hpp"

namespace ldpcb::simd::avx2 {
namespace {

struct Pair {
  __m256d a;  // first output of blocks 0..3
  __m256d b;  // second output of blocks 0..3
};

// Four Philox blocks, one per 64-bit lane; each 32-bit word lives in the low
// half of its lane so _mm256_mul_epu32 gives the full 64-bit product.
inline void philox4(StreamAddress addr, std::uint64_t block, __m256i* out_a,
                    __m256i* out_b) {
  const __m256i lo32 = _mm256_set1_epi64x(0xFFFFFFFFll);
  const __m256i blocks = _mm256_add_epi64(
      _mm256_set1_epi64x(static_cast<long long>(block)), _mm256_setr_epi64x(0, 1, 2, 3));
  __m256i x0 = _mm256_and_si256(blocks, lo32);
  __m256i x1 = _mm256_srli_epi64(blocks, 32);
  __m256i x2 = _mm256_set1_epi64x(static_cast<std::uint32_t>(addr.sample));
  __m256i x3 = _mm256_set1_epi64x(static_cast<std::uint32_t>(addr.sample >> 32));
  std::uint32_t k0 = static_cast<std::uint32_t>(addr.key);
  std::uint32_t k1 = static_cast<std::uint32_t>(addr.key >> 32);
  const __m256i m0 = _mm256_set1_epi64x(detail::kPhiloxM0);
  const __m256i m1 = _mm256_set1_epi64x(detail::kPhiloxM1);
  for (int round = 0; round < detail::kPhiloxRounds; ++round) {
    const __m256i p0 = _mm256_mul_epu32(m0, x0);
    const __m256i p1 = _mm256_mul_epu32(m1, x2);
    const __m256i key0 = _mm256_set1_epi64x(k0);
    const __m256i key1 = _mm256_set1_epi64x(k1);
    const __m256i y0 =
        _mm256_xor_si256(_mm256_xor_si256(_mm256_srli_epi64(p1, 32), x1), key0);
    const __m256i y1 = _mm256_and_si256(p1, lo32);
    const __m256i y2 =
        _mm256_xor_si256(_mm256_xor_si256(_mm256_srli_epi64(p0, 32), x3), key1);
    const __m256i y3 = _mm256_and_si256(p0, lo32);
    x0 = y0;
    x1 = y1;
    x2 = y2;
    x3 = y3;
    k0 += detail::kPhiloxW0;
    k1 += detail::kPhiloxW1;
  }
  *out_a = _mm256_or_si256(x0, _mm256_slli_epi64(x1, 32));
  *out_b = _mm256_or_si256(x2, _mm256_slli_epi64(x3, 32));
}

inline __m256d to_uniform(__m256i v) {
  const __m256i bits = _mm256_or_si256(
      _mm256_srli_epi64(v, 12),
      _mm256_set1_epi64x(static_cast<long long>(detail::kOneBits)));
  return _mm256_sub_pd(_mm256_castsi256_pd(bits),
                       _mm256_set1_pd(detail::kUniformOffset));
}

inline Pair uniform4(StreamAddress addr, std::uint64_t block) {
  __m256i a;
  __m256i b;
  philox4(addr, block, &a, &b);
  return {to_uniform(a), to_uniform(b)};
}

inline __m256d negate(__m256d x) { return _mm256_xor_pd(x, _mm256_set1_pd(-0.0)); }

inline __m256d log_positive(__m256d x) {
  const __m256i bits = _mm256_castpd_si256(x);
  const __m256i ebits = _mm256_or_si256(
      _mm256_srli_epi64(bits, 52),
      _mm256_set1_epi64x(static_cast<long long>(detail::kExpMagicBits)));
  __m256d exponent = _mm256_sub_pd(
      _mm256_sub_pd(_mm256_castsi256_pd(ebits), _mm256_set1_pd(detail::kExpMagic)),
      _mm256_set1_pd(1023.0));
  __m256d m = _mm256_castsi256_pd(_mm256_or_si256(
      _mm256_and_si256(bits, _mm256_set1_epi64x(
                                 static_cast<long long>(detail::kMantissaMask))),
      _mm256_set1_epi64x(static_cast<long long>(detail::kOneBits))));
  const __m256d big = _mm256_cmp_pd(m, _mm256_set1_pd(detail::kSqrt2), _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), big);
  exponent =
      _mm256_blendv_pd(exponent, _mm256_add_pd(exponent, _mm256_set1_pd(1.0)), big);
  const __m256d f = _mm256_sub_pd(m, _mm256_set1_pd(1.0));
  const __m256d s = _mm256_div_pd(f, _mm256_add_pd(_mm256_set1_pd(2.0), f));
  const __m256d z = _mm256_mul_pd(s, s);
  __m256d p = _mm256_set1_pd(detail::kLogCoeffs[0]);
  for (std::size_t i = 1; i < std::size(detail::kLogCoeffs); ++i) {
    p = _mm256_add_pd(_mm256_mul_pd(p, z), _mm256_set1_pd(detail::kLogCoeffs[i]));
  }
  const __m256d r = _mm256_mul_pd(_mm256_add_pd(s, s), p);
  return _mm256_add_pd(
      _mm256_add_pd(_mm256_mul_pd(exponent, _mm256_set1_pd(detail::kLn2Lo)), r),
      _mm256_mul_pd(exponent, _mm256_set1_pd(detail::kLn2Hi)));
}

template <std::size_t N>
inline __m256d horner(const double (&coeffs)[N], __m256d x2) {
  __m256d p = _mm256_set1_pd(coeffs[0]);
  for (std::size_t i = 1; i < N; ++i) {
    p = _mm256_add_pd(_mm256_mul_pd(p, x2), _mm256_set1_pd(coeffs[i]));
  }
  return p;
}

inline __m256d lane_mask(__m128i bits32) {
  // 0 / -1 per 32-bit lane widened to 64-bit lanes.
  return _mm256_castsi256_pd(_mm256_cvtepi32_epi64(bits32));
}

inline void sincos_2pi(__m256d u, __m256d* s_out, __m256d* c_out) {
  const __m256d w = _mm256_mul_pd(u, _mm256_set1_pd(4.0));
  const __m256d q = _mm256_round_pd(w, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const __m256d x = _mm256_mul_pd(_mm256_sub_pd(w, q), _mm256_set1_pd(detail::kHalfPi));
  const __m256d x2 = _mm256_mul_pd(x, x);
  const __m256d sx = _mm256_mul_pd(x, horner(detail::kSinCoeffs, x2));
  const __m256d cx = horner(detail::kCosCoeffs, x2);

  const __m128i quadrant = _mm256_cvtpd_epi32(q);
  const __m128i one = _mm_set1_epi32(1);
  const __m128i two = _mm_set1_epi32(2);
  const __m256d odd =
      lane_mask(_mm_cmpeq_epi32(_mm_and_si128(quadrant, one), one));
  const __m256d flip_s =
      lane_mask(_mm_cmpeq_epi32(_mm_and_si128(quadrant, two), two));
  const __m256d flip_c = lane_mask(
      _mm_cmpeq_epi32(_mm_and_si128(_mm_add_epi32(quadrant, one), two), two));

  __m256d sv = _mm256_blendv_pd(sx, cx, odd);
  __m256d cv = _mm256_blendv_pd(cx, sx, odd);
  sv = _mm256_blendv_pd(sv, negate(sv), flip_s);
  cv = _mm256_blendv_pd(cv, negate(cv), flip_c);
  *s_out = sv;
  *c_out = cv;
}

inline __m256d laplace_from_uniform(__m256d u) {
  const __m256d lower = _mm256_cmp_pd(u, _mm256_set1_pd(0.5), _CMP_LT_OQ);
  const __m256d w = _mm256_blendv_pd(
      _mm256_mul_pd(_mm256_sub_pd(_mm256_set1_pd(1.0), u), _mm256_set1_pd(2.0)),
      _mm256_add_pd(u, u), lower);
  const __m256d l = log_positive(w);
  return _mm256_blendv_pd(negate(l), l, lower);
}

inline void store_interleaved(double* out, __m256d a, __m256d b) {
  const __m256d lo = _mm256_unpacklo_pd(a, b);  // a0 b0 a2 b2
  const __m256d hi = _mm256_unpackhi_pd(a, b);  // a1 b1 a3 b3
  _mm256_storeu_pd(out, _mm256_permute2f128_pd(lo, hi, 0x20));
  _mm256_storeu_pd(out + 4, _mm256_permute2f128_pd(lo, hi, 0x31));
}

void fill_uniform(StreamAddress addr, std::uint64_t block, double* out,
                  std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8, block += 4) {
    const Pair p = uniform4(addr, block);
    store_interleaved(out + i, p.a, p.b);
  }
  detail::uniform_blocks(addr, block, out + i, n - i);
}

void fill_laplace(StreamAddress addr, std::uint64_t block, double* out,
                  std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8, block += 4) {
    const Pair p = uniform4(addr, block);
    store_interleaved(out + i, laplace_from_uniform(p.a), laplace_from_uniform(p.b));
  }
  detail::laplace_blocks(addr, block, out + i, n - i);
}

void fill_gaussian(StreamAddress addr, std::uint64_t block, double* out,
                   std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8, block += 4) {
    const Pair p = uniform4(addr, block);
    const __m256d r =
        _mm256_sqrt_pd(_mm256_mul_pd(log_positive(p.a), _mm256_set1_pd(-2.0)));
    __m256d s;
    __m256d c;
    sincos_2pi(p.b, &s, &c);
    store_interleaved(out + i, _mm256_mul_pd(r, c), _mm256_mul_pd(r, s));
  }
  detail::gaussian_blocks(addr, block, out + i, n - i);
}

void scaled_accumulate(double* acc, const double* noise, const double* scales,
                       std::size_t bins, std::size_t components) {
  for (std::size_t c = 0; c < components; ++c) {
    double* row = acc + c * bins;
    const double* src = noise + c * bins;
    std::size_t b = 0;
    for (; b + 4 <= bins; b += 4) {
      const __m256d v = _mm256_add_pd(
          _mm256_loadu_pd(row + b),
          _mm256_mul_pd(_mm256_loadu_pd(scales + b), _mm256_loadu_pd(src + b)));
      _mm256_storeu_pd(row + b, v);
    }
    for (; b < bins; ++b) row[b] = row[b] + scales[b] * src[b];
  }
}

void wishart_accumulate(double* acc, const double* z, const double* scales,
                        std::size_t bins, std::size_t dim, std::size_t degrees) {
  const double m = static_cast<double>(degrees);
  const __m256d mv = _mm256_set1_pd(m);
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      double* out = acc + (r * dim + c) * bins;
      std::size_t b = 0;
      for (; b + 4 <= bins; b += 4) {
        __m256d s = _mm256_mul_pd(_mm256_loadu_pd(z + r * bins + b),
                                  _mm256_loadu_pd(z + c * bins + b));
        for (std::size_t j = 1; j < degrees; ++j) {
          s = _mm256_add_pd(
              s, _mm256_mul_pd(_mm256_loadu_pd(z + (j * dim + r) * bins + b),
                               _mm256_loadu_pd(z + (j * dim + c) * bins + b)));
        }
        if (r == c) s = _mm256_sub_pd(s, mv);
        _mm256_storeu_pd(out + b,
                         _mm256_add_pd(_mm256_loadu_pd(out + b),
                                       _mm256_mul_pd(_mm256_loadu_pd(scales + b), s)));
      }
      for (; b < bins; ++b) {
        double s = z[r * bins + b] * z[c * bins + b];
        for (std::size_t j = 1; j < degrees; ++j) {
          s = s + z[(j * dim + r) * bins + b] * z[(j * dim + c) * bins + b];
        }
        if (r == c) s = s - m;
        out[b] = out[b] + scales[b] * s;
      }
    }
  }
}

}  // namespace

const KernelTable& table() {
  static const KernelTable t{Backend::kAvx2,   fill_uniform,      fill_laplace,
                             fill_gaussian,    scaled_accumulate, wishart_accumulate};
  return t;
}

}  // namespace ldpcb::simd::avx2
