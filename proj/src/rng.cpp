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

#include "ldpcb/rng.hpp"

#include "simd/detail.hpp"

namespace ldpcb {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_key(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t k = splitmix64(base);
  for (std::uint64_t p : path) k = splitmix64(k ^ splitmix64(p + 0x632BE59BD9B4E019ull));
  return k;
}

double Rng::uniform() {
  if (pending_kind_ == Pending::kUniform) {
    pending_kind_ = Pending::kNone;
    return pending_;
  }
  const auto r = simd::detail::philox(addr_, next_block());
  pending_ = simd::detail::to_uniform(r.b);
  pending_kind_ = Pending::kUniform;
  return simd::detail::to_uniform(r.a);
}

double Rng::laplace() { return simd::detail::laplace_from_uniform(uniform()); }

double Rng::gaussian() {
  if (pending_kind_ == Pending::kGaussian) {
    pending_kind_ = Pending::kNone;
    return pending_;
  }
  const auto r = simd::detail::philox(addr_, next_block());
  double z0;
  double z1;
  simd::detail::box_muller(simd::detail::to_uniform(r.a), simd::detail::to_uniform(r.b),
                           &z0, &z1);
  pending_ = z1;
  pending_kind_ = Pending::kGaussian;
  return z0;
}

std::uint64_t Rng::below(std::uint64_t n) {
  const auto r = simd::detail::philox(addr_, next_block());
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(r.a) * n) >> 64);
}

void Rng::fill_uniform(double* out, std::size_t n) {
  simd::active().fill_uniform(addr_, block_, out, n);
  block_ += (n + 1) / 2;
}

void Rng::fill_laplace(double* out, std::size_t n) {
  simd::active().fill_laplace(addr_, block_, out, n);
  block_ += (n + 1) / 2;
}

void Rng::fill_gaussian(double* out, std::size_t n) {
  simd::active().fill_gaussian(addr_, block_, out, n);
  block_ += (n + 1) / 2;
}

}  // namespace ldpcb
