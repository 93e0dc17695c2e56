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

// Data-parallel kernels behind the noise mechanisms.
//
// Every kernel has a scalar reference implementation and, where the target
// supports it, an AVX2 variant. Variants are required to be bit-identical to
// the scalar reference: both use the same counter-based generator, the same
// polynomial log/sin/cos, and the same operation order with floating-point
// contraction disabled. The active table is chosen once at startup from the
// CPU features and may be overridden with LDPCB_KERNELS=scalar|avx2.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace ldpcb::simd {

enum class Backend { kScalar, kAvx2 };

std::string_view backend_name(Backend backend);

// 64-bit Philox key plus the high half of the counter. A (key, sample) pair
// addresses an independent stream of 128-bit blocks indexed by `block`.
struct StreamAddress {
  std::uint64_t key = 0;
  std::uint64_t sample = 0;
};

struct KernelTable {
  Backend backend;

  // out[i] = Uniform(0,1) (open interval), two values per block starting at
  // `first_block`.
  void (*fill_uniform)(StreamAddress addr, std::uint64_t first_block,
                       double* out, std::size_t n);

  // out[i] = standard Laplace draws (scale 1, mean 0).
  void (*fill_laplace)(StreamAddress addr, std::uint64_t first_block,
                       double* out, std::size_t n);

  // out[i] = standard normal draws (Box-Muller, both branches used).
  void (*fill_gaussian)(StreamAddress addr, std::uint64_t first_block,
                        double* out, std::size_t n);

  // acc[c * bins + b] += scales[b] * noise[c * bins + b] for c < components.
  void (*scaled_accumulate)(double* acc, const double* noise,
                            const double* scales, std::size_t bins,
                            std::size_t components);

  // Centered Wishart accumulation in component-major layout.
  //   z:   degrees x dim x bins standard normals, z[(j*dim + r)*bins + b]
  //   acc: dim x dim x bins, acc[(r*dim + c)*bins + b]
  // acc_b += scales[b] * (sum_j z_j z_j^T - degrees * I).
  void (*wishart_accumulate)(double* acc, const double* z,
                             const double* scales, std::size_t bins,
                             std::size_t dim, std::size_t degrees);
};

const KernelTable& scalar_table();

// Null when the backend was not compiled in or the CPU lacks support.
const KernelTable* avx2_table();

bool backend_available(Backend backend);

// The table used by the library. Thread-safe after first call.
const KernelTable& active();

// Test hook. Returns false (and changes nothing) if unavailable.
bool force_backend(Backend backend);

// Scalar math shared by both backends; exposed for tests.
double det_log(double x);
void det_sincos_2pi(double u, double* sin_out, double* cos_out);

}  // namespace ldpcb::simd
