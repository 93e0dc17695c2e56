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

// Layered partition of the feature ball. Layer h splits every partitioning
// bin of layer h-1 into M+1 shells by the norm of the residual feature
// phi_h, where shell k holds gamma^-(k+1) < |phi_h| <= gamma^-k (shell M
// holds everything below gamma^-M and is never split further).

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "ldpcb/mechanisms.hpp"
#include "ldpcb/types.hpp"

namespace ldpcb {

struct Kappas {
  double kappa1 = 0.0;   // PCR activity threshold
  double kappa1p = 0.0;  // CI activity threshold
  double kappa2 = 0.0;   // CI correction term
  double kappa3 = 0.0;   // CI constant term
};

struct LayerParams {
  int d = 2;
  double T = 1024;
  double beta = 0.25;
  double gamma = 0.0;  // T^beta
  int M = 0;           // ceil(1 / (2 beta))
  PrivacyBudget alpha;
  double delta = 0.05;
  Kappas kappas;
  bool paper_faithful = false;

  // Fills gamma and M from (T, beta) and validates.
  static LayerParams make(int d, double T, double beta, double alpha, double delta,
                          const Kappas& kappas, bool paper_faithful);

  // Smallest constants admitted by the concentration analysis.
  static Kappas paper_kappas(int d, double alpha, double beta, double delta);

  void validate() const;

  // gamma^-k for 0 <= k <= M.
  double shell_radius(int k) const { return radii_[static_cast<std::size_t>(k)]; }

 private:
  std::vector<double> radii_;
};

// k = max{k <= M : norm <= gamma^-k}. Norms within 1e-9 above 1 map to 0.
int shell_index(const LayerParams& params, double norm);

struct BinAddress {
  std::vector<int> ks;

  int layer() const { return static_cast<int>(ks.size()); }
  bool partitioning(int M) const;
  std::string to_string() const;
  bool operator==(const BinAddress&) const = default;
};

// Throws std::invalid_argument if `parent` is not a partitioning bin or k is
// outside [0, M].
BinAddress child_address(const BinAddress& parent, int k, int M);

struct BinNode {
  BinAddress address;
  int k = 0;  // last shell index

  // Anonymized update statistics (copied in when the update batch closes).
  double c_hat = 0.0;
  Vec lambda_hat;
  Mat Lambda_hat;

  // Principal component regression.
  double psi_hat = 0.0;
  Vec u_hat;
  double s_hat = 0.0;
  Vec theta_hat;
  bool active = true;

  // Confidence interval state.
  double eps_hat = 0.0;
  double eps_bar = 0.0;
  double ci_const = 0.0;
  bool ci_fitted = false;  // false: eta falls back to the shell radius
  std::string diagnostic;
};

struct LayerRecord {
  std::size_t bin = 0;
  int k = 0;
  Vec phi;
  double y = 0.0;
  bool parent_active = true;
};

struct RoutedSample {
  std::array<LayerRecord, kMaxDim> layers;
  int count = 0;  // number of layers reached; < depth when a shell-M bin ends the walk

  const LayerRecord& operator[](int h) const { return layers[static_cast<std::size_t>(h - 1)]; }
};

class PartitionTree {
 public:
  explicit PartitionTree(const LayerParams& params);

  const LayerParams& params() const { return params_; }
  int depth() const { return static_cast<int>(layers_.size()); }

  // Materializes every bin of layer depth()+1. Children of inactive bins
  // start inactive.
  void open_layer();

  // Number of bins on layer h: M^(h-1) (M+1).
  std::size_t layer_size(int h) const;
  std::vector<BinNode>& layer_bins(int h) { return layers_.at(static_cast<std::size_t>(h - 1)); }
  const std::vector<BinNode>& layer_bins(int h) const {
    return layers_.at(static_cast<std::size_t>(h - 1));
  }
  BinNode& bin(int h, std::size_t index) { return layer_bins(h)[index]; }
  const BinNode& bin(int h, std::size_t index) const { return layer_bins(h)[index]; }

  std::size_t index_of(const BinAddress& address) const;
  BinAddress address_of(int h, std::size_t index) const;
  // Index of the layer-(h-1) parent of bin `index` on layer h (h >= 2).
  std::size_t parent_index(int h, std::size_t index) const;
  // Index on layer h+1 of child k of partitioning bin `index` on layer h.
  std::size_t child_index(int h, std::size_t index, int k) const;

  // Figure-2 residualization through layers 1..depth. Layers below `depth`
  // must already carry their fitted u_hat / theta_hat.
  RoutedSample route(const Vec& phi, double y, int depth) const;

  nlohmann::json to_json() const;

 private:
  LayerParams params_;
  std::vector<std::vector<BinNode>> layers_;
};

nlohmann::json to_json(const BinNode& node);

}  // namespace ldpcb
