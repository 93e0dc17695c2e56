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

#include <cstddef>

#include "detail.hpp"
#include "ldpcb/simd/kernels.hpp"

namespace ldpcb::simd {
namespace {

void fill_uniform(StreamAddress addr, std::uint64_t first_block, double* out,
                  std::size_t n) {
  detail::uniform_blocks(addr, first_block, out, n);
}

void fill_laplace(StreamAddress addr, std::uint64_t first_block, double* out,
                  std::size_t n) {
  detail::laplace_blocks(addr, first_block, out, n);
}

void fill_gaussian(StreamAddress addr, std::uint64_t first_block, double* out,
                   std::size_t n) {
  detail::gaussian_blocks(addr, first_block, out, n);
}

void scaled_accumulate(double* acc, const double* noise, const double* scales,
                       std::size_t bins, std::size_t components) {
  for (std::size_t c = 0; c < components; ++c) {
    double* row = acc + c * bins;
    const double* src = noise + c * bins;
    for (std::size_t b = 0; b < bins; ++b) row[b] = row[b] + scales[b] * src[b];
  }
}

void wishart_accumulate(double* acc, const double* z, const double* scales,
                        std::size_t bins, std::size_t dim, std::size_t degrees) {
  const double m = static_cast<double>(degrees);
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      double* out = acc + (r * dim + c) * bins;
      for (std::size_t b = 0; b < bins; ++b) {
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

const KernelTable& scalar_table() {
  static const KernelTable table{Backend::kScalar,  fill_uniform,
                                 fill_laplace,      fill_gaussian,
                                 scaled_accumulate, wishart_accumulate};
  return table;
}

double det_log(double x) { return detail::log_positive(x); }

void det_sincos_2pi(double u, double* sin_out, double* cos_out) {
  detail::sincos_2pi(u, sin_out, cos_out);
}

}  // namespace ldpcb::simd
