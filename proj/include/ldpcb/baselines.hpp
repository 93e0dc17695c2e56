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

// Comparison estimators and policies: non-private ridge regression, input
// perturbation, perturbed sufficient statistics, and the bandit policies built
// on them.

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ldpcb/elimination.hpp"
#include "ldpcb/lplr.hpp"
#include "ldpcb/policy.hpp"
#include "ldpcb/rng.hpp"
#include "ldpcb/types.hpp"

namespace ldpcb {

// Solves (sum phi phi^T + lambda I) theta = sum y phi. Dummy samples are
// skipped.
Vec ridge_fit(std::span<const Sample> data, int d, double lambda_reg);

class RidgeOracle {
 public:
  RidgeOracle(int d, double lambda_reg);

  void add(const Vec& phi, double y);
  std::int64_t count() const { return count_; }
  Vec theta() const;
  // ||phi||_{V^-1} with V = gram + lambda I.
  double width(const Vec& phi) const;
  const Mat& gram() const { return gram_; }
  const Vec& moment() const { return moment_; }

 private:
  double lambda_;
  Mat gram_;
  Vec moment_;
  std::int64_t count_ = 0;
};

enum class IpEstimator { kRidge, kBiasCorrected };

IpEstimator parse_ip_estimator(const std::string& s);
std::string to_string(IpEstimator e);

// Stores only (phi + Lap_d(1/alpha), y + Lap(1/alpha)). alpha = +inf turns
// the noise off.
class InputPerturbationOracle {
 public:
  InputPerturbationOracle(int d, double alpha, std::uint64_t key);

  void feed(const Vec& phi, double y);
  std::size_t size() const { return phi_.size(); }
  const std::vector<Vec>& perturbed_features() const { return phi_; }
  const std::vector<double>& perturbed_rewards() const { return y_; }

  // Estimates are projected onto the unit ball. bias_corrected subtracts the
  // noise covariance 2/alpha^2 I from the perturbed Gram matrix (then clips it
  // to PSD) before solving.
  Vec fit(IpEstimator estimator, double lambda_reg) const;

 private:
  int d_;
  double alpha_;
  std::uint64_t key_;
  std::vector<Vec> phi_;
  std::vector<double> y_;
};

Vec input_perturb_fit(std::span<const Sample> data, int d, double alpha, std::uint64_t key,
                      IpEstimator estimator, double lambda_reg);

// Privately accumulated Lambda = sum phi phi^T and mu = sum y phi: a Laplace
// channel on mu and a centered Wishart channel on Lambda, alpha/2 each.
class SuffstatAccumulator {
 public:
  SuffstatAccumulator(int d, double alpha, std::uint64_t key, bool zero_noise = false);

  void add(const Vec& phi, double y);
  std::int64_t count() const { return count_; }
  const Mat& gram() const { return gram_; }
  const Vec& moment() const { return moment_; }
  // Laplace scale of each mu component per sample.
  double moment_scale() const;
  // Multiplier on the per-sample centered Wishart draw.
  double wishart_scale() const;
  // Typical operator norm of the accumulated Gram noise after t samples.
  double noise_level(std::int64_t t) const;
  bool zero_noise() const { return zero_noise_; }

 private:
  int d_;
  double alpha_;
  std::uint64_t key_;
  bool zero_noise_;
  Mat gram_;
  Vec moment_;
  std::int64_t count_ = 0;
};

// Offline estimate from the private statistics: (psd(Lambda) + lambda I)^-1 mu
// projected onto the unit ball.
Vec suffstat_fit(std::span<const Sample> data, int d, double alpha, std::uint64_t key,
                 double lambda_reg, bool zero_noise = false);

struct UcbConfig {
  int d = 2;
  int actions = 2;
  double alpha = 1.0;
  bool zero_noise = false;
  double lambda_reg = 1.0;
  // Regularizer added on top of lambda_reg: shift * noise_level(t).
  double shift = 1.0;
  // Confidence multiplier on ||phi||_{V^-1}.
  double bonus = 1.0;
  void validate() const;
};

// Optimistic policy over one set of privately accumulated statistics shared
// by all actions. Illustrative: the bonus is the plain ellipsoidal one.
class SuffstatUcbPolicy : public BanditPolicy {
 public:
  SuffstatUcbPolicy(const UcbConfig& config, std::uint64_t key);
  Decision decide(std::span<const Vec> features, Rng& rng) override;
  void record(std::span<const Vec> features, int action, double y) override;
  // Current (theta, V) after the regularizer shift.
  Vec theta() const;

 private:
  Mat design_matrix() const;

  UcbConfig config_;
  SuffstatAccumulator stats_;
};

// Non-private ridge UCB with the same decision rule. Equal to
// SuffstatUcbPolicy with zero_noise set.
class RidgeUcbPolicy : public BanditPolicy {
 public:
  explicit RidgeUcbPolicy(const UcbConfig& config);
  Decision decide(std::span<const Vec> features, Rng& rng) override;
  void record(std::span<const Vec> features, int action, double y) override;

 private:
  UcbConfig config_;
  RidgeOracle ridge_;
};

struct RidgeElimConfig {
  int d = 2;
  int actions = 2;
  EpochSchedule schedule;
  double lambda_reg = 1.0;
  double bonus = 1.0;  // delta(phi) = min(1, bonus ||phi||_{V^-1})
  void validate() const;
};

// Algorithm 1 with per-epoch, per-action non-private ridge oracles.
class RidgeEliminationPolicy : public BanditPolicy {
 public:
  explicit RidgeEliminationPolicy(const RidgeElimConfig& config);
  Decision decide(std::span<const Vec> features, Rng& rng) override;
  void record(std::span<const Vec> features, int action, double y) override;

 private:
  struct Table {
    Vec theta;
    RidgeOracle oracle;
  };
  Evaluation evaluate(const Table& t, const Vec& phi) const;

  RidgeElimConfig config_;
  std::int64_t t_ = 0;
  int epoch_ = 1;
  std::vector<std::vector<Table>> tables_;  // epochs 2.. (epoch 1 is f=0, delta=1)
  std::vector<RidgeOracle> current_;
};

}  // namespace ldpcb
