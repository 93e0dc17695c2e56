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

#include "ldpcb/simd/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <random>
#include <vector>

#include "gtest/gtest.h"

namespace ldpcb::simd {
namespace {

using FillFn = void (*)(StreamAddress, std::uint64_t, double*, std::size_t);

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

TEST(DetMathTest, LogMatchesLibm) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> unif(-40.0, 40.0);
  for (int i = 0; i < 100000; ++i) {
    const double x = std::exp(unif(gen));
    const double ref = std::log(x);
    EXPECT_NEAR(det_log(x), ref, 4e-16 * std::max(1.0, std::abs(ref))) << x;
  }
  EXPECT_EQ(det_log(1.0), 0.0);
  EXPECT_NEAR(det_log(0x1.0p-53), -53 * std::log(2.0), 1e-14);
}

TEST(DetMathTest, SinCosMatchesLibm) {
  for (int i = 0; i < 20000; ++i) {
    const double u = (i + 0.5) / 20000.0;
    double s;
    double c;
    det_sincos_2pi(u, &s, &c);
    EXPECT_NEAR(s, std::sin(2 * M_PI * u), 1e-15);
    EXPECT_NEAR(c, std::cos(2 * M_PI * u), 1e-15);
  }
}

TEST(ScalarKernelTest, UniformIsOpenAndDeterministic) {
  const auto& t = scalar_table();
  std::vector<double> a(1001);
  std::vector<double> b(1001);
  t.fill_uniform({42, 3}, 0, a.data(), a.size());
  t.fill_uniform({42, 3}, 0, b.data(), b.size());
  EXPECT_TRUE(bitwise_equal(a, b));
  for (double u : a) {
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  // Changing either address word changes the stream.
  t.fill_uniform({42, 4}, 0, b.data(), b.size());
  EXPECT_NE(a[0], b[0]);
  t.fill_uniform({43, 3}, 0, b.data(), b.size());
  EXPECT_NE(a[0], b[0]);
}

TEST(ScalarKernelTest, BlockOffsetContinuesStream) {
  const auto& t = scalar_table();
  std::vector<double> whole(40);
  std::vector<double> tail(20);
  t.fill_gaussian({9, 1}, 0, whole.data(), whole.size());
  t.fill_gaussian({9, 1}, 10, tail.data(), tail.size());
  for (int i = 0; i < 20; ++i) EXPECT_EQ(whole[20 + i], tail[i]);
}

TEST(ScalarKernelTest, LaplaceAndGaussianMoments) {
  const auto& t = scalar_table();
  const std::size_t n = 400000;
  std::vector<double> x(n);
  t.fill_laplace({1234, 0}, 0, x.data(), n);
  double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0;
  double mean_abs = 0;
  for (double v : x) {
    var += v * v;
    mean_abs += std::abs(v);
  }
  var /= n;
  mean_abs /= n;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 2.0, 0.03);
  EXPECT_NEAR(mean_abs, 1.0, 0.01);

  t.fill_gaussian({1234, 0}, 0, x.data(), n);
  mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  var = 0;
  double kurt = 0;
  for (double v : x) {
    var += v * v;
    kurt += v * v * v * v;
  }
  var /= n;
  kurt /= n;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 1.0, 0.01);
  EXPECT_NEAR(kurt, 3.0, 0.06);
}

class BackendEquivalenceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    vec_ = avx2_table();
    if (vec_ == nullptr) GTEST_SKIP() << "AVX2 not available";
  }
  const KernelTable* vec_ = nullptr;
};

TEST_F(BackendEquivalenceTest, FillKernelsBitIdentical) {
  const auto& ref = scalar_table();
  const FillFn pairs[][2] = {{ref.fill_uniform, vec_->fill_uniform},
                             {ref.fill_laplace, vec_->fill_laplace},
                             {ref.fill_gaussian, vec_->fill_gaussian}};
  for (const auto& p : pairs) {
    for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 15u, 16u, 17u, 1000u, 4099u}) {
      for (std::uint64_t block : {0ull, 5ull, 0xFFFFFFFEull, 1ull << 40}) {
        const StreamAddress addr{0xDEADBEEFCAFEF00Dull + n, block * 3 + 1};
        std::vector<double> a(n);
        std::vector<double> b(n);
        p[0](addr, block, a.data(), n);
        p[1](addr, block, b.data(), n);
        EXPECT_TRUE(bitwise_equal(a, b)) << "n=" << n << " block=" << block;
      }
    }
  }
}

TEST_F(BackendEquivalenceTest, AccumulateKernelsBitIdentical) {
  const auto& ref = scalar_table();
  for (std::size_t bins : {1u, 3u, 4u, 5u, 12u, 13u}) {
    const std::size_t d = 3;
    const std::size_t deg = d + 1;
    std::vector<double> z(deg * d * bins);
    std::vector<double> scales(bins);
    ref.fill_gaussian({77, bins}, 0, z.data(), z.size());
    ref.fill_uniform({78, bins}, 0, scales.data(), scales.size());
    std::vector<double> acc_a(d * d * bins, 0.25);
    std::vector<double> acc_b = acc_a;
    ref.wishart_accumulate(acc_a.data(), z.data(), scales.data(), bins, d, deg);
    vec_->wishart_accumulate(acc_b.data(), z.data(), scales.data(), bins, d, deg);
    EXPECT_TRUE(bitwise_equal(acc_a, acc_b)) << bins;
    ref.scaled_accumulate(acc_a.data(), z.data(), scales.data(), bins, d * d);
    vec_->scaled_accumulate(acc_b.data(), z.data(), scales.data(), bins, d * d);
    EXPECT_TRUE(bitwise_equal(acc_a, acc_b)) << bins;
  }
}

TEST(WishartKernelTest, MatchesDirectSum) {
  const auto& t = scalar_table();
  const std::size_t d = 2;
  const std::size_t deg = 3;
  const std::size_t bins = 2;
  // z[(j*d + r)*bins + b]
  std::vector<double> z = {1, 2, 3, 4, 0.5, -1, 2, 0, -1, 1, 1, 1};
  std::vector<double> scales = {1.0, 2.0};
  std::vector<double> acc(d * d * bins, 0.0);
  t.wishart_accumulate(acc.data(), z.data(), scales.data(), bins, d, deg);
  for (std::size_t b = 0; b < bins; ++b) {
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        double s = 0;
        for (std::size_t j = 0; j < deg; ++j) {
          s += z[(j * d + r) * bins + b] * z[(j * d + c) * bins + b];
        }
        if (r == c) s -= deg;
        EXPECT_DOUBLE_EQ(acc[(r * d + c) * bins + b], scales[b] * s);
      }
    }
  }
}

TEST(DispatchTest, ForceBackendSwitchesActiveTable) {
  ASSERT_TRUE(force_backend(Backend::kScalar));
  EXPECT_EQ(active().backend, Backend::kScalar);
  if (backend_available(Backend::kAvx2)) {
    ASSERT_TRUE(force_backend(Backend::kAvx2));
    EXPECT_EQ(active().backend, Backend::kAvx2);
  }
  EXPECT_EQ(backend_name(Backend::kAvx2), "avx2");
}

}  // namespace
}  // namespace ldpcb::simd
