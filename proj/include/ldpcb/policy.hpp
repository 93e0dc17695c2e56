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

#include <span>

#include "ldpcb/rng.hpp"
#include "ldpcb/types.hpp"

namespace ldpcb {

struct Decision {
  int action = 0;
  int active_size = 0;
  int epoch = 1;
};

// A sequential policy over a finite action set. One decide() then one
// record() per period.
class BanditPolicy {
 public:
  virtual ~BanditPolicy() = default;
  virtual Decision decide(std::span<const Vec> features, Rng& rng) = 0;
  virtual void record(std::span<const Vec> features, int action, double y) = 0;
};

}  // namespace ldpcb
