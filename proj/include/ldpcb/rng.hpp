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

// Counter-based random streams. A stream is identified by a 64-bit key plus a
// 64-bit lane ("sample"); draws at a given position never depend on how many
// draws other streams made, so replications and workers are order-independent.

#include <cstddef>
#include <cstdint>
#include <initializer_list>

#include "ldpcb/simd/kernels.hpp"

namespace ldpcb {

std::uint64_t splitmix64(std::uint64_t x);

// Folds a path of integers into a key: derive_key(seed, {rep, epoch, ...}).
std::uint64_t derive_key(std::uint64_t base, std::initializer_list<std::uint64_t> path);

// Named channels used when deriving keys.
enum class Channel : std::uint64_t {
  kUpdate = 1,
  kCi = 2,
  kData = 3,
  kPolicy = 4,
  kReward = 5,
  kPerturb = 6,
  kAudit = 7,
  kMechanism = 8,
};

inline std::uint64_t channel(Channel c) { return static_cast<std::uint64_t>(c); }

class Rng {
 public:
  Rng() = default;
  explicit Rng(std::uint64_t key, std::uint64_t sample = 0) : addr_{key, sample} {}

  simd::StreamAddress address() const { return addr_; }
  std::uint64_t position() const { return block_; }

  // Independent child stream; does not advance this one.
  Rng split(std::uint64_t tag) const { return Rng(derive_key(addr_.key, {addr_.sample, tag})); }

  double uniform();
  double laplace();   // scale 1
  double gaussian();  // standard normal
  bool bernoulli(double p) { return uniform() < p; }
  // Uniform integer in [0, n). n > 0.
  std::uint64_t below(std::uint64_t n);

  // Bulk draws through the active kernel table.
  void fill_uniform(double* out, std::size_t n);
  void fill_laplace(double* out, std::size_t n);
  void fill_gaussian(double* out, std::size_t n);

 private:
  enum class Pending { kNone, kUniform, kGaussian };
  std::uint64_t next_block() { return block_++; }

  simd::StreamAddress addr_{};
  std::uint64_t block_ = 0;
  Pending pending_kind_ = Pending::kNone;
  double pending_ = 0.0;
};

}  // namespace ldpcb
