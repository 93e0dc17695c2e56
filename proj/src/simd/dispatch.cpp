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

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "ldpcb/simd/kernels.hpp"

namespace ldpcb::simd {

#if defined(LDPCB_HAVE_AVX2)
namespace avx2 {
const KernelTable& table();
}  // namespace avx2
#endif

namespace {

const KernelTable* initial_table() {
  const char* env = std::getenv("LDPCB_KERNELS");
  if (env != nullptr && std::string_view(env) == "scalar") return &scalar_table();
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable* avx2_table() {
#if defined(LDPCB_HAVE_AVX2)
  if (__builtin_cpu_supports("avx2")) return &avx2::table();
#endif
  return nullptr;
}

bool backend_available(Backend backend) {
  return backend == Backend::kScalar || avx2_table() != nullptr;
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool force_backend(Backend backend) {
  const KernelTable* t =
      backend == Backend::kScalar ? &scalar_table() : avx2_table();
  if (t == nullptr) return false;
  current().store(t, std::memory_order_release);
  return true;
}

}  // namespace ldpcb::simd
