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

// Layered private linear regression oracle. Samples stream in d rounds of
// 2n: the first n of a round privately update every bin of the current layer,
// then a principal component fit runs per bin, then the next n samples
// privately estimate pointwise confidence widths for that layer.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "json.hpp"
#include "ldpcb/partition.hpp"
#include "ldpcb/rng.hpp"
#include "ldpcb/types.hpp"

namespace ldpcb {

struct OracleConfig {
  LayerParams layer_params;
  std::int64_t n_per_layer = 0;
  // Disables every noise draw. Test-only; the CLI never sets it for
  // configurations that require privacy.
  bool zero_noise = false;

  int d() const { return layer_params.d; }
  std::int64_t total_samples() const { return 2 * d() * n_per_layer; }
  void validate() const;
};

// A record fed to the oracle. `dummy` marks the placeholder sample that
// carries no information (its features and reward are ignored).
struct Sample {
  Vec phi;
  double y = 0.0;
  bool dummy = false;
};

struct Evaluation {
  double f_hat = 0.0;
  double delta = 0.0;
  int layers = 0;  // bins visited
};

// Finalized prediction and confidence width. Cheap to copy; shares the
// immutable tree it was built from.
class OracleEstimate {
 public:
  // f = value and delta = width for every feature.
  static OracleEstimate constant(double value, double width);
  explicit OracleEstimate(std::shared_ptr<const PartitionTree> tree);
  OracleEstimate() : OracleEstimate(constant(0.0, 1.0)) {}

  Evaluation evaluate(const Vec& phi) const;
  double f_hat(const Vec& phi) const { return evaluate(phi).f_hat; }
  double delta(const Vec& phi) const { return evaluate(phi).delta; }
  const PartitionTree* tree() const { return tree_.get(); }

 private:
  OracleEstimate(double value, double width) : const_f_(value), const_delta_(width) {}
  std::shared_ptr<const PartitionTree> tree_;
  double const_f_ = 0.0;
  double const_delta_ = 1.0;
};

// Statistics of one bin before the update batch closes. Exposed so the
// single-bin update and the oracle share one code path.
class LayerAccumulator {
 public:
  // One accumulator slot per shell index in `shells`.
  LayerAccumulator(const LayerParams& params, std::span<const int> shells);

  std::size_t bins() const { return bins_; }
  // One update step: the sample's bin (or none) gets data, every bin gets
  // noise unless zero_noise.
  void add(std::size_t bin, const Vec* phi_h, double y_h, Rng& rng, bool zero_noise);
  void add_dummy(Rng& rng, bool zero_noise) { add(0, nullptr, 0.0, rng, zero_noise); }
  void store(std::vector<BinNode>& layer) const;
  void load(const std::vector<BinNode>& layer);

 private:
  std::size_t bins_;
  int d_;
  std::vector<double> c_, lambda_, Lambda_;
  std::vector<double> scale_count_, scale_moment_, scale_wishart_;
  std::vector<double> lap_, gauss_;
};

// Single-bin update step. phi_h == nullptr is the dummy branch.
void lplr_update(BinNode& bin, const Vec* phi_h, double y_h, const LayerParams& params,
                 Rng& rng, bool zero_noise = false);

// Closest PSD matrix with range orthogonal to the columns of U:
// P sym(raw) P with negative eigenvalues clipped, P = I - U U^T.
Mat psd_project_orthogonal(const Mat& raw, const Mat& U);

// Principal component fit of one bin; U holds the ancestors' u_hat columns.
void lplr_pcr(BinNode& bin, std::int64_t n, const Mat& U, const LayerParams& params);

// eta_B(phi) for a bin reached with residual phi_h, given the parent's eta.
double eta_hat(const BinNode& bin, const Vec& phi_h, double eta_parent,
               const LayerParams& params);

// Runs the confidence-interval pass for layer h over `samples` (size n).
void lplr_ci(PartitionTree& tree, int h, std::span<const Sample> samples, std::int64_t n,
             std::uint64_t key, bool zero_noise = false);

Evaluation lplr_aggregate(const PartitionTree& tree, const Vec& phi);

namespace detail {
class CiPass;
}  // namespace detail

class LplrOracle {
 public:
  using LayerObserver = std::function<void(int h, const PartitionTree& tree)>;

  LplrOracle(const OracleConfig& config, std::uint64_t key);
  ~LplrOracle();
  LplrOracle(LplrOracle&&) noexcept;
  LplrOracle& operator=(LplrOracle&&) noexcept;

  // Called after each layer's principal component fit, before its CI pass.
  void set_layer_observer(LayerObserver observer) { observer_ = std::move(observer); }

  void feed(const Vec& phi, double y);
  void feed_dummy();
  void feed(const Sample& s) { s.dummy ? feed_dummy() : feed(s.phi, s.y); }

  bool finalized() const { return consumed_ >= config_.total_samples(); }
  std::int64_t consumed() const { return consumed_; }
  const OracleConfig& config() const { return config_; }
  const PartitionTree& tree() const { return *tree_; }

  // Requires finalized().
  OracleEstimate estimate() const;
  nlohmann::json dump() const;

 private:
  void feed_impl(const Vec* phi, double y);
  void close_update_batch();
  void close_ci_batch();
  std::uint64_t layer_key(int h, Channel c) const;

  OracleConfig config_;
  std::uint64_t key_;
  std::shared_ptr<PartitionTree> tree_;
  std::unique_ptr<LayerAccumulator> acc_;
  std::unique_ptr<detail::CiPass> ci_;
  std::int64_t consumed_ = 0;
  LayerObserver observer_;
};

// Feeds the first 2 d n samples of `samples` and returns the estimate.
OracleEstimate run_oracle(std::span<const Sample> samples, const OracleConfig& config,
                          std::uint64_t key);

}  // namespace ldpcb
