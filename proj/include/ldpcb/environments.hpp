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

// Synthetic linear contextual bandits and the two-point designs used by the
// lower-bound experiments.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ldpcb/lplr.hpp"
#include "ldpcb/rng.hpp"
#include "ldpcb/types.hpp"

namespace ldpcb {

// Finite feature law.
struct DiscreteDesign {
  std::vector<Vec> points;
  std::vector<double> probs;

  void validate() const;
  std::size_t sample_index(Rng& rng) const;
  const Vec& sample(Rng& rng) const { return points[sample_index(rng)]; }
  // E[phi phi^T].
  Mat second_moment() const;
};

enum class RewardNoise { kNone, kBernoulli, kUniform };

struct NoiseModel {
  RewardNoise kind = RewardNoise::kBernoulli;
  double width = 0.0;  // half-width for kUniform
};

RewardNoise parse_reward_noise(const std::string& s);
std::string to_string(RewardNoise kind);

struct Period {
  std::size_t context = 0;
  std::span<const Vec> features;
  double optimal_value = 0.0;
  int optimal_action = 0;
};

class LinearEnv {
 public:
  // contexts[i][a] = phi(x_i, a); probs defaults to uniform when empty.
  LinearEnv(Vec theta, std::vector<std::vector<Vec>> contexts, std::vector<double> probs,
            NoiseModel noise);

  int d() const { return static_cast<int>(theta_.size()); }
  int actions() const { return static_cast<int>(contexts_.front().size()); }
  std::size_t context_count() const { return contexts_.size(); }
  const Vec& theta() const { return theta_; }
  const NoiseModel& noise() const { return noise_; }
  const std::vector<double>& probs() const { return probs_; }
  std::span<const Vec> features(std::size_t context) const { return contexts_[context]; }

  double mean(const Vec& phi) const { return phi.dot(theta_); }
  Period period(std::size_t context) const;
  Period sample_period(Rng& rng) const;
  // Clamps to [-1, 1] and counts the event; valid noise specs never clamp.
  double realize_reward(const Vec& phi, Rng& rng) const;
  std::int64_t clamp_events() const { return clamps_; }

  // The law of phi(x, a) for a fixed action.
  DiscreteDesign action_design(int action) const;

  nlohmann::json to_json() const;

 private:
  Vec theta_;
  std::vector<std::vector<Vec>> contexts_;
  std::vector<double> probs_;
  std::vector<double> cdf_;
  NoiseModel noise_;
  mutable std::int64_t clamps_ = 0;
};

// Features uniform in the unit ball (radius >= 0.1), theta with norm 0.9,
// both drawn from `seed`.
LinearEnv random_grid_env(int d, int actions, int contexts, std::uint64_t seed, NoiseModel noise);

// Spec-driven construction:
//   {"kind": "grid", "d", "actions", "contexts", "theta_seed" | "theta", "noise"}
//   {"kind": "case1" | "case2", "horizon", "theta", "noise"}
//   {"kind": "explicit", "theta", "contexts": [[[..], ..], ..], "probs", "noise"}
LinearEnv make_env(const nlohmann::json& spec, std::uint64_t seed);

enum class HardKind { kMseThm1, kMadThm2, kCase1, kCase2 };

HardKind parse_hard_kind(const std::string& s);
std::string to_string(HardKind kind);

struct HardDesign {
  HardKind kind = HardKind::kMadThm2;
  double n = 1;
  double alpha = 1.0;
  double c = 0.0;      // construction constant
  double delta = 0.0;  // case1 / case2 parameter

  // Constants from (kind, n, alpha); delta defaults to 1/sqrt(n).
  static HardDesign make(HardKind kind, double n, double alpha);
  static HardDesign make(HardKind kind, double n, double alpha, double delta);

  DiscreteDesign design() const;
  // The two hypotheses of the matching lower-bound argument.
  std::pair<Vec, Vec> hypotheses() const;
};

// I.i.d. draws from `law` with noiseless y = phi^T theta.
std::vector<Sample> design_stream(const DiscreteDesign& law, std::size_t count, const Vec& theta,
                                  Rng& rng);
std::vector<Sample> hard_design_stream(const HardDesign& design, std::size_t count,
                                       const Vec& theta, Rng& rng);

// Two-action bandit over the case1 / case2 feature law: action 0 plays the
// drawn vector, action 1 its mirror image in the second coordinate.
LinearEnv hard_bandit_env(HardKind kind, double horizon, const Vec& theta, NoiseModel noise);

}  // namespace ldpcb
