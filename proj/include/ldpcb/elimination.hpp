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

// Epoch-doubling action elimination over per-action LPLR oracles.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ldpcb/lplr.hpp"
#include "ldpcb/policy.hpp"
#include "ldpcb/rng.hpp"
#include "ldpcb/types.hpp"

namespace ldpcb {

// Epoch tau (1-based) has length n_tau = 2^tau * n0; the last epoch is cut
// at T.
struct EpochSchedule {
  std::int64_t n0 = 1;
  std::int64_t T = 1;

  // ceil(d^2 ln(d T / beta)).
  static std::int64_t default_n0(int d, double T, double beta);

  std::int64_t length(int tau) const;
  // First period (1-based) of epoch tau.
  std::int64_t start(int tau) const;
  int epoch_of(std::int64_t t) const;
  int epochs() const { return epoch_of(T); }
  void validate() const;
};

struct PolicyConfig {
  int d = 2;
  int actions = 2;
  EpochSchedule schedule;
  double T = 0;  // horizon used for gamma; defaults to schedule.T
  double beta = 0.25;
  double alpha = 1.0;
  double delta = 0.05;
  Kappas kappas;
  bool paper_faithful = false;
  bool zero_noise = false;

  void validate() const;
  LayerParams layer_params() const;
  // Per-layer sample count for an epoch-tau oracle: floor(n_tau / (2d)), or 0
  // when that is too small for the configured mode.
  std::int64_t n_per_layer(int tau) const;
};

// Algorithm 1's filter: starting from all actions, for tau' = 1..epochs keep
// a iff f(tau', a) + delta(tau', a) >= max over kept a' of f - delta.
using TableFn = std::function<Evaluation(int tau, int action)>;

// Nested active sets; levels[0] is the full action set and levels[tau'] the
// set after applying the epoch tau' tables.
struct ActiveSets {
  std::vector<std::vector<int>> levels;
  const std::vector<int>& last() const { return levels.back(); }
};

ActiveSets eliminate(int actions, int epochs, const TableFn& table);

class EliminationPolicy : public BanditPolicy {
 public:
  // (tau, action, phi) -> (f_hat, delta). Replaces the fitted tables when set.
  using TableOverride = std::function<Evaluation(int tau, int action, const Vec& phi)>;

  EliminationPolicy(const PolicyConfig& config, std::uint64_t key);

  void set_table_override(TableOverride fn) { override_ = std::move(fn); }

  // Periods recorded so far; the next decision is for period t() + 1.
  std::int64_t t() const { return t_; }
  int epoch() const { return epoch_; }
  // Tables for epochs 1..epoch() are available.
  int tables() const { return static_cast<int>(tables_.size()); }
  Evaluation table(int tau, int action, const Vec& phi) const;

  ActiveSets active_set(std::span<const Vec> features) const;
  int select_action(std::span<const Vec> features, Rng& rng) const;
  // Draw from a precomputed active set.
  static int select_from(const std::vector<int>& active, Rng& rng);

  void record_outcome(std::span<const Vec> features, int action, double y);

  // BanditPolicy. decide() keeps the computed sets for last_active().
  Decision decide(std::span<const Vec> features, Rng& rng) override;
  void record(std::span<const Vec> features, int action, double y) override {
    record_outcome(features, action, y);
  }
  const ActiveSets& last_active() const { return last_; }

  const PolicyConfig& config() const { return config_; }
  const std::vector<LplrOracle>& oracles() const { return oracles_; }
  const std::vector<OracleEstimate>& epoch_tables(int tau) const;

 private:
  void open_epoch();
  void close_epoch();

  PolicyConfig config_;
  std::uint64_t key_;
  std::int64_t t_ = 0;
  int epoch_ = 1;
  std::vector<std::vector<OracleEstimate>> tables_;
  std::vector<LplrOracle> oracles_;
  TableOverride override_;
  ActiveSets last_;
};

}  // namespace ldpcb
