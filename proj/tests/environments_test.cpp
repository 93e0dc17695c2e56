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

#include "ldpcb/environments.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gtest/gtest.h"

namespace ldpcb {
namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

TEST(LinearEnvTest, SingleContextIsDeterministic) {
  const LinearEnv env(vec2(0.3, 0.4), {{vec2(1, 0), vec2(0, 1)}}, {}, {RewardNoise::kNone, 0});
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const Period p = env.sample_period(rng);
    EXPECT_EQ(p.context, 0u);
    EXPECT_EQ(p.features[0], vec2(1, 0));
    EXPECT_DOUBLE_EQ(p.optimal_value, 0.4);
    EXPECT_EQ(p.optimal_action, 1);
  }
}

TEST(LinearEnvTest, OptimalValueMatchesBruteForce) {
  const LinearEnv env = random_grid_env(3, 8, 16, 5, {});
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    const Period p = env.sample_period(rng);
    double best = -2;
    for (const Vec& phi : p.features) best = std::max(best, phi.dot(env.theta()));
    EXPECT_EQ(p.optimal_value, best);
    EXPECT_EQ(env.mean(p.features[static_cast<std::size_t>(p.optimal_action)]), best);
    for (const Vec& phi : p.features) EXPECT_LE(phi.norm(), 1.0 + 1e-12);
  }
}

TEST(LinearEnvTest, ContextFrequenciesMatchCategorical) {
  const std::vector<double> probs = {0.1, 0.2, 0.3, 0.4};
  std::vector<std::vector<Vec>> grid;
  for (int i = 0; i < 4; ++i) grid.push_back({vec2(0.1 * i, 0)});
  const LinearEnv env(vec2(0.5, 0), grid, probs, {});
  const int n = 100000;
  std::vector<int> counts(4, 0);
  Rng rng(3);
  for (int i = 0; i < n; ++i) ++counts[env.sample_period(rng).context];
  for (std::size_t i = 0; i < 4; ++i) {
    const double sd = std::sqrt(n * probs[i] * (1 - probs[i]));
    EXPECT_NEAR(counts[i], n * probs[i], 3 * sd);
  }
}

TEST(LinearEnvTest, RewardModels) {
  const Vec phi = vec2(0.6, 0.2);
  const LinearEnv quiet(vec2(0.5, -0.5), {{phi}}, {}, {RewardNoise::kNone, 0});
  Rng rng(4);
  EXPECT_DOUBLE_EQ(quiet.realize_reward(phi, rng), 0.2);
  EXPECT_EQ(quiet.realize_reward(Vec::Zero(2), rng), 0.0);

  const LinearEnv coin(vec2(0.5, -0.5), {{phi}}, {}, {RewardNoise::kBernoulli, 0});
  const int n = 100000;
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    const double y = coin.realize_reward(phi, rng);
    ASSERT_TRUE(y == 1.0 || y == -1.0);
    sum += y;
  }
  EXPECT_NEAR(sum / n, 0.2, 3 * std::sqrt((1 - 0.04) / n));

  const LinearEnv flat(vec2(0.5, -0.5), {{phi}}, {}, {RewardNoise::kUniform, 0.5});
  for (int i = 0; i < 1000; ++i) {
    const double y = flat.realize_reward(phi, rng);
    EXPECT_GE(y, -0.3);
    EXPECT_LE(y, 0.7);
  }
  EXPECT_EQ(coin.clamp_events() + flat.clamp_events(), 0);

  const LinearEnv loud(vec2(0.9, 0), {{vec2(1, 0)}}, {}, {RewardNoise::kUniform, 1.0});
  for (int i = 0; i < 1000; ++i) EXPECT_LE(loud.realize_reward(vec2(1, 0), rng), 1.0);
  EXPECT_GT(loud.clamp_events(), 0);
}

TEST(LinearEnvTest, RejectsInvalidInputs) {
  EXPECT_THROW(LinearEnv(vec2(1, 1), {{vec2(1, 0)}}, {}, {}), std::invalid_argument);
  EXPECT_THROW(LinearEnv(vec2(0.5, 0), {{vec2(1, 1)}}, {}, {}), std::invalid_argument);
  EXPECT_THROW(LinearEnv(vec2(0.5, 0), {{vec2(1, 0)}}, {0.5}, {}), std::invalid_argument);
  EXPECT_THROW(LinearEnv(vec2(0.5, 0), {{vec2(1, 0)}, {vec2(1, 0), vec2(0, 1)}}, {}, {}),
               std::invalid_argument);
}

TEST(LinearEnvTest, JsonRoundTrip) {
  const LinearEnv env = random_grid_env(2, 3, 4, 9, {RewardNoise::kUniform, 0.1});
  const LinearEnv back = make_env(env.to_json(), 0);
  EXPECT_EQ(back.theta(), env.theta());
  ASSERT_EQ(back.context_count(), env.context_count());
  for (std::size_t i = 0; i < env.context_count(); ++i) {
    for (int a = 0; a < env.actions(); ++a) EXPECT_EQ(back.features(i)[a], env.features(i)[a]);
  }
  EXPECT_EQ(back.noise().kind, RewardNoise::kUniform);
  EXPECT_THROW(make_env({{"kind", "nope"}}, 0), std::invalid_argument);
}

TEST(HardDesignTest, MadThm2Coordinates) {
  const HardDesign h = HardDesign::make(HardKind::kMadThm2, 1e6, 1.0);
  const DiscreteDesign law = h.design();
  Rng rng(5);
  const auto s = hard_design_stream(h, 1000, vec2(0.5, 0.5), rng);
  for (const Sample& x : s) {
    EXPECT_EQ(x.phi[0], 0.5);
    EXPECT_NEAR(std::abs(x.phi[1]), 0.0007, 1e-18);
    EXPECT_EQ(x.y, x.phi.dot(vec2(0.5, 0.5)));
  }
  EXPECT_EQ(law.points[0][1], -law.points[1][1]);
}

TEST(HardDesignTest, MseThm1Constant) {
  const HardDesign h = HardDesign::make(HardKind::kMseThm1, 1e4, 1.0);
  EXPECT_NEAR(h.design().probs[1], 1.0 / (4 * std::sqrt(2.0) * (std::exp(1.0) - 1)) / 100, 1e-15);
  EXPECT_NEAR(h.design().probs[1], 0.001029, 5e-7);
}

TEST(HardDesignTest, DegenerateCase2) {
  const HardDesign h = HardDesign::make(HardKind::kCase2, 100, 1.0, 0.0);
  Rng rng(6);
  for (const Sample& s : hard_design_stream(h, 200, vec2(0.5, 0.5), rng)) {
    EXPECT_EQ(s.phi[0], 1.0);
    EXPECT_EQ(s.phi[1], 0.0);
  }
}

TEST(HardDesignTest, EmpiricalFrequenciesMatchTwoPointLaws) {
  const int n = 100000;
  for (HardKind k : {HardKind::kMseThm1, HardKind::kMadThm2, HardKind::kCase1, HardKind::kCase2}) {
    const HardDesign h = HardDesign::make(k, 4096, 1.0);
    const DiscreteDesign law = h.design();
    law.validate();
    Rng rng(7);
    int first = 0;
    for (int i = 0; i < n; ++i) first += law.sample_index(rng) == 0;
    const double p = law.probs[0];
    EXPECT_NEAR(first, n * p, 3 * std::sqrt(n * p * (1 - p)) + 1) << to_string(k);
  }
}

TEST(HardDesignTest, SecondMomentsNearlyMatchAcrossCases) {
  const double n = 1e4;
  const Mat a = HardDesign::make(HardKind::kCase1, n, 1.0).design().second_moment();
  const Mat b = HardDesign::make(HardKind::kCase2, n, 1.0).design().second_moment();
  EXPECT_NEAR(a(1, 1), 0.01, 1e-15);
  EXPECT_NEAR(b(1, 1), 0.01 / 1.01, 1e-15);
  EXPECT_NEAR(b(0, 1), 0.0, 1e-15);
}

TEST(HardBanditTest, MirroredActions) {
  const LinearEnv env = hard_bandit_env(HardKind::kCase2, 4096, vec2(0.5, 0.5), {});
  EXPECT_EQ(env.actions(), 2);
  EXPECT_EQ(env.context_count(), 2u);
  const Period p0 = env.period(0);
  const Period p1 = env.period(1);
  EXPECT_EQ(p0.optimal_action, 0);
  EXPECT_EQ(p1.optimal_action, 1);
  const double gap = p0.optimal_value - env.mean(p0.features[1]);
  EXPECT_NEAR(gap, std::sqrt(1.0 / 64) / std::sqrt(1 + 1.0 / 64), 1e-15);
  EXPECT_THROW(hard_bandit_env(HardKind::kMadThm2, 10, vec2(0.5, 0.5), {}), std::invalid_argument);
}

}  // namespace
}  // namespace ldpcb
