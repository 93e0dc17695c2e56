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

#include "ldpcb/elimination.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ldpcb {

std::int64_t EpochSchedule::default_n0(int d, double T, double beta) {
  return std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::ceil(d * d * std::log(d * T / beta))));
}

std::int64_t EpochSchedule::length(int tau) const {
  if (tau < 1 || tau > 62) throw std::out_of_range("epoch index out of range");
  const std::int64_t cap = std::numeric_limits<std::int64_t>::max() >> tau;
  return n0 > cap ? std::numeric_limits<std::int64_t>::max() : n0 << tau;
}

std::int64_t EpochSchedule::start(int tau) const {
  // sum_{s < tau} 2^s n0 = (2^tau - 2) n0
  std::int64_t t = 1;
  for (int s = 1; s < tau; ++s) t += length(s);
  return t;
}

int EpochSchedule::epoch_of(std::int64_t t) const {
  if (t < 1) throw std::out_of_range("periods are 1-based");
  int tau = 1;
  std::int64_t end = length(1);
  while (t > end) end += length(++tau);
  return tau;
}

void EpochSchedule::validate() const {
  if (n0 < 1) throw std::invalid_argument("n0 must be >= 1");
  if (T < 1) throw std::invalid_argument("T must be >= 1");
}

void PolicyConfig::validate() const {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("d out of range");
  if (actions < 1) throw std::invalid_argument("need at least one action");
  schedule.validate();
  layer_params().validate();
}

LayerParams PolicyConfig::layer_params() const {
  const double horizon = T > 0 ? T : static_cast<double>(schedule.T);
  return LayerParams::make(d, horizon, beta, alpha, delta, kappas, paper_faithful);
}

std::int64_t PolicyConfig::n_per_layer(int tau) const {
  const std::int64_t n = schedule.length(tau) / (2 * d);
  if (paper_faithful) {
    const double bound = 2.0 * d * std::log(24.0 * d / (beta * delta));
    if (static_cast<double>(n) < bound) return 0;
  }
  return n;
}

// ---------------------------------------------------------------------------

EliminationPolicy::EliminationPolicy(const PolicyConfig& config, std::uint64_t key)
    : config_(config), key_(key) {
  config_.validate();
  tables_.emplace_back(static_cast<std::size_t>(config_.actions),
                       OracleEstimate::constant(0.0, 1.0));
  open_epoch();
}

void EliminationPolicy::open_epoch() {
  OracleConfig oc;
  oc.layer_params = config_.layer_params();
  oc.n_per_layer = config_.n_per_layer(epoch_);
  oc.zero_noise = config_.zero_noise;
  oracles_.clear();
  oracles_.reserve(static_cast<std::size_t>(config_.actions));
  for (int a = 0; a < config_.actions; ++a) {
    oracles_.emplace_back(oc, derive_key(key_, {static_cast<std::uint64_t>(epoch_),
                                                static_cast<std::uint64_t>(a)}));
  }
}

void EliminationPolicy::close_epoch() {
  std::vector<OracleEstimate> next;
  next.reserve(oracles_.size());
  for (const LplrOracle& o : oracles_) next.push_back(o.estimate());
  tables_.push_back(std::move(next));
  ++epoch_;
  open_epoch();
}

const std::vector<OracleEstimate>& EliminationPolicy::epoch_tables(int tau) const {
  return tables_.at(static_cast<std::size_t>(tau - 1));
}

Evaluation EliminationPolicy::table(int tau, int action, const Vec& phi) const {
  if (override_) return override_(tau, action, phi);
  return epoch_tables(tau)[static_cast<std::size_t>(action)].evaluate(phi);
}

ActiveSets eliminate(int actions, int epochs, const TableFn& table) {
  ActiveSets out;
  std::vector<int> cur(static_cast<std::size_t>(actions));
  for (int a = 0; a < actions; ++a) cur[static_cast<std::size_t>(a)] = a;
  out.levels.push_back(cur);
  std::vector<Evaluation> ev(cur.size());
  for (int tau = 1; tau <= epochs; ++tau) {
    double floor = -std::numeric_limits<double>::infinity();
    for (int a : cur) {
      Evaluation& e = ev[static_cast<std::size_t>(a)];
      e = table(tau, a);
      floor = std::max(floor, e.f_hat - e.delta);
    }
    std::vector<int> next;
    for (int a : cur) {
      const Evaluation& e = ev[static_cast<std::size_t>(a)];
      if (e.f_hat + e.delta >= floor) next.push_back(a);
    }
    cur = std::move(next);
    out.levels.push_back(cur);
  }
  return out;
}

ActiveSets EliminationPolicy::active_set(std::span<const Vec> features) const {
  if (static_cast<int>(features.size()) != config_.actions) {
    throw std::invalid_argument("one feature vector per action required");
  }
  return eliminate(config_.actions, epoch_, [&](int tau, int a) {
    return table(tau, a, features[static_cast<std::size_t>(a)]);
  });
}

Decision EliminationPolicy::decide(std::span<const Vec> features, Rng& rng) {
  last_ = active_set(features);
  return {select_from(last_.last(), rng), static_cast<int>(last_.last().size()), epoch_};
}

int EliminationPolicy::select_from(const std::vector<int>& active, Rng& rng) {
  if (active.empty()) throw std::logic_error("empty active set");
  return active[rng.below(active.size())];
}

int EliminationPolicy::select_action(std::span<const Vec> features, Rng& rng) const {
  return select_from(active_set(features).last(), rng);
}

void EliminationPolicy::record_outcome(std::span<const Vec> features, int action, double y) {
  if (action < 0 || action >= config_.actions) throw std::out_of_range("action out of range");
  if (t_ >= config_.schedule.T) throw std::logic_error("horizon exhausted");
  for (int a = 0; a < config_.actions; ++a) {
    LplrOracle& o = oracles_[static_cast<std::size_t>(a)];
    if (o.finalized()) continue;  // epoch remainder beyond 2dn is discarded
    if (a == action) {
      o.feed(features[static_cast<std::size_t>(a)], y);
    } else {
      o.feed_dummy();
    }
  }
  ++t_;
  if (t_ == config_.schedule.start(epoch_ + 1) - 1 && t_ < config_.schedule.T) close_epoch();
}

}  // namespace ldpcb
