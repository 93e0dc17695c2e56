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

#include "ldpcb/partition.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ldpcb {

namespace {

constexpr double kNormSlack = 1e-9;

nlohmann::json vec_json(const Vec& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

nlohmann::json mat_json(const Mat& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

}  // namespace

LayerParams LayerParams::make(int d, double T, double beta, double alpha, double delta,
                              const Kappas& kappas, bool paper_faithful) {
  LayerParams p;
  p.d = d;
  p.T = T;
  p.beta = beta;
  p.alpha.alpha = alpha;
  p.delta = delta;
  p.kappas = kappas;
  p.paper_faithful = paper_faithful;
  if (!(beta > 0.0) || !(T > 1.0)) throw std::invalid_argument("need beta > 0 and T > 1");
  p.gamma = std::pow(T, beta);
  p.M = static_cast<int>(std::ceil(1.0 / (2.0 * beta)));
  p.validate();
  p.radii_.resize(static_cast<std::size_t>(p.M) + 1);
  for (int k = 0; k <= p.M; ++k) p.radii_[static_cast<std::size_t>(k)] = std::pow(p.gamma, -k);
  return p;
}

Kappas LayerParams::paper_kappas(int d, double alpha, double beta, double delta) {
  const double l48 = std::log(48.0 * d / (beta * delta));
  const double l24 = std::log(24.0 * d / (beta * delta));
  return {43.0 / alpha * l48, 15.0 / alpha * l48, 118.0 / alpha * l24, 300.0 / alpha * l48};
}

void LayerParams::validate() const {
  if (d < 1 || d > kMaxDim) {
    throw std::invalid_argument("feature dimension must lie in [1, " + std::to_string(kMaxDim) +
                                "]");
  }
  alpha.validate();
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (!(gamma >= 2.0)) {
    throw std::invalid_argument("gamma = T^beta must be at least 2 (got " +
                                std::to_string(gamma) + ")");
  }
  if (M < 1) throw std::invalid_argument("M must be >= 1");
  if (std::pow(static_cast<double>(M), d - 1) * (M + 1) > 4e6) {
    throw std::invalid_argument("partition too large: M^(d-1)(M+1) bins on the last layer");
  }
  if (!(kappas.kappa1 > 0 && kappas.kappa1p > 0 && kappas.kappa2 > 0 && kappas.kappa3 > 0)) {
    throw std::invalid_argument("all kappa constants must be positive");
  }
  if (paper_faithful) {
    const Kappas lo = paper_kappas(d, alpha.alpha, beta, delta);
    if (kappas.kappa1 < lo.kappa1 || kappas.kappa1p < lo.kappa1p || kappas.kappa2 < lo.kappa2 ||
        kappas.kappa3 < lo.kappa3) {
      throw std::invalid_argument("paper-faithful mode requires kappas at or above their bounds");
    }
  }
}

int shell_index(const LayerParams& params, double norm) {
  for (int k = params.M; k >= 0; --k) {
    if (norm <= params.shell_radius(k)) return k;
  }
  if (norm <= 1.0 + kNormSlack) return 0;
  throw std::invalid_argument("feature norm exceeds 1");
}

bool BinAddress::partitioning(int M) const {
  for (int k : ks) {
    if (k >= M) return false;
  }
  return true;
}

std::string BinAddress::to_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < ks.size(); ++i) os << (i ? "," : "") << ks[i];
  os << ')';
  return os.str();
}

BinAddress child_address(const BinAddress& parent, int k, int M) {
  if (!parent.partitioning(M)) {
    throw std::invalid_argument("bin " + parent.to_string() + " is not a partitioning bin");
  }
  if (k < 0 || k > M) throw std::invalid_argument("child shell index out of range");
  BinAddress child = parent;
  child.ks.push_back(k);
  return child;
}

PartitionTree::PartitionTree(const LayerParams& params)
    : params_(LayerParams::make(params.d, params.T, params.beta, params.alpha.alpha, params.delta,
                                params.kappas, params.paper_faithful)) {}

std::size_t PartitionTree::layer_size(int h) const {
  std::size_t n = static_cast<std::size_t>(params_.M) + 1;
  for (int i = 1; i < h; ++i) n *= static_cast<std::size_t>(params_.M);
  return n;
}

void PartitionTree::open_layer() {
  const int h = depth() + 1;
  if (h > params_.d) throw std::logic_error("all layers already open");
  const std::size_t n = layer_size(h);
  std::vector<BinNode> bins(n);
  const int d = params_.d;
  for (std::size_t i = 0; i < n; ++i) {
    BinNode& b = bins[i];
    b.address = address_of(h, i);
    b.k = b.address.ks.back();
    b.lambda_hat = Vec::Zero(d);
    b.Lambda_hat = Mat::Zero(d, d);
    b.u_hat = Vec::Zero(d);
    b.theta_hat = Vec::Zero(d);
    if (h > 1 && !bin(h - 1, parent_index(h, i)).active) {
      b.active = false;
      b.diagnostic = "parent inactive";
    }
  }
  layers_.push_back(std::move(bins));
}

std::size_t PartitionTree::index_of(const BinAddress& address) const {
  const int M = params_.M;
  std::size_t q = 0;
  for (std::size_t i = 0; i + 1 < address.ks.size(); ++i) {
    if (address.ks[i] < 0 || address.ks[i] >= M) {
      throw std::invalid_argument("address " + address.to_string() + " has no bin");
    }
    q = q * static_cast<std::size_t>(M) + static_cast<std::size_t>(address.ks[i]);
  }
  const int last = address.ks.back();
  if (last < 0 || last > M) throw std::invalid_argument("shell index out of range");
  return q * (static_cast<std::size_t>(M) + 1) + static_cast<std::size_t>(last);
}

BinAddress PartitionTree::address_of(int h, std::size_t index) const {
  const std::size_t M = static_cast<std::size_t>(params_.M);
  BinAddress a;
  a.ks.resize(static_cast<std::size_t>(h));
  a.ks.back() = static_cast<int>(index % (M + 1));
  std::size_t q = index / (M + 1);
  for (int i = h - 2; i >= 0; --i) {
    a.ks[static_cast<std::size_t>(i)] = static_cast<int>(q % M);
    q /= M;
  }
  return a;
}

std::size_t PartitionTree::parent_index(int h, std::size_t index) const {
  if (h < 2) throw std::invalid_argument("layer-1 bins have no parent");
  const std::size_t M = static_cast<std::size_t>(params_.M);
  const std::size_t q = index / (M + 1);
  return (q / M) * (M + 1) + q % M;
}

std::size_t PartitionTree::child_index(int h, std::size_t index, int k) const {
  const std::size_t M = static_cast<std::size_t>(params_.M);
  if (index >= layer_size(h)) throw std::out_of_range("bin index out of range");
  const std::size_t last = index % (M + 1);
  if (last >= M) throw std::invalid_argument("bin is not a partitioning bin");
  return ((index / (M + 1)) * M + last) * (M + 1) + static_cast<std::size_t>(k);
}

RoutedSample PartitionTree::route(const Vec& phi, double y, int depth) const {
  if (phi.size() != params_.d) throw std::invalid_argument("feature has wrong dimension");
  if (depth < 1 || depth > params_.d) throw std::invalid_argument("route depth out of range");
  RoutedSample out;
  Vec cur = phi;
  double cur_y = y;
  std::size_t index = 0;
  for (int h = 1; h <= depth; ++h) {
    const int k = shell_index(params_, cur.norm());
    index = h == 1 ? static_cast<std::size_t>(k) : child_index(h - 1, index, k);
    LayerRecord& rec = out.layers[static_cast<std::size_t>(h - 1)];
    rec.bin = index;
    rec.k = k;
    rec.phi = cur;
    rec.y = cur_y;
    rec.parent_active = h == 1 || bin(h - 1, parent_index(h, index)).active;
    out.count = h;
    if (h == depth || k == params_.M) break;
    const BinNode& b = bin(h, index);
    cur_y = cur_y - cur.dot(b.theta_hat);
    cur = cur - b.u_hat * b.u_hat.dot(cur);
  }
  return out;
}

nlohmann::json to_json(const BinNode& b) {
  return {{"address", b.address.ks},
          {"k", b.k},
          {"c_hat", b.c_hat},
          {"lambda_hat", vec_json(b.lambda_hat)},
          {"Lambda_hat", mat_json(b.Lambda_hat)},
          {"psi_hat", b.psi_hat},
          {"u_hat", vec_json(b.u_hat)},
          {"s_hat", b.s_hat},
          {"theta_hat", vec_json(b.theta_hat)},
          {"active", b.active},
          {"eps_hat", b.eps_hat},
          {"eps_bar", b.eps_bar},
          {"ci_const", b.ci_const},
          {"ci_fitted", b.ci_fitted},
          {"diagnostic", b.diagnostic}};
}

nlohmann::json PartitionTree::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : layers_) {
    nlohmann::json bins = nlohmann::json::array();
    for (const BinNode& b : layer) bins.push_back(ldpcb::to_json(b));
    layers.push_back(std::move(bins));
  }
  return {{"d", params_.d},       {"T", params_.T},         {"beta", params_.beta},
          {"gamma", params_.gamma}, {"M", params_.M},         {"alpha", params_.alpha.alpha},
          {"delta", params_.delta}, {"kappa1", params_.kappas.kappa1},
          {"kappa1p", params_.kappas.kappa1p}, {"kappa2", params_.kappas.kappa2},
          {"kappa3", params_.kappas.kappa3},   {"layers", std::move(layers)}};
}

}  // namespace ldpcb
