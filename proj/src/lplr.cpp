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

#include "ldpcb/lplr.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ldpcb {

namespace {

double clip_unit(double v) { return std::clamp(v, -1.0, 1.0); }

Mat ancestor_basis(const PartitionTree& tree, int h, std::size_t index) {
  const int d = tree.params().d;
  Mat U(d, h - 1);
  std::size_t idx = index;
  for (int l = h - 1; l >= 1; --l) {
    idx = tree.parent_index(l + 1, idx);
    U.col(l - 1) = tree.bin(l, idx).u_hat;
  }
  return U;
}

// eta of the layer-(h-1) bin on the routed path; 0 at h = 1.
double parent_eta(const PartitionTree& tree, const RoutedSample& rs, int h) {
  double eta = 0.0;
  for (int l = 1; l < h; ++l) {
    eta = eta_hat(tree.bin(l, rs[l].bin), rs[l].phi, eta, tree.params());
  }
  return eta;
}

void fit_layer(PartitionTree& tree, int h, std::int64_t n) {
  auto& layer = tree.layer_bins(h);
  for (std::size_t i = 0; i < layer.size(); ++i) {
    lplr_pcr(layer[i], n, ancestor_basis(tree, h, i), tree.params());
  }
}

}  // namespace

namespace detail {

// Streaming CI pass for one layer.
class CiPass {
 public:
  CiPass(const PartitionTree& tree, int h) : h_(h) {
    const auto& layer = tree.layer_bins(h);
    const auto& p = tree.params();
    acc_.assign(layer.size(), 0.0);
    scale_.assign(layer.size(), 0.0);
    noise_.resize(layer.size());
    for (std::size_t b = 0; b < layer.size(); ++b) {
      if (layer[b].s_hat > 0.0) {
        scale_[b] = ci_scale(p.gamma, layer[b].k, layer[b].s_hat, p.alpha.alpha);
        any_active_ = true;
      }
    }
  }

  void add(const PartitionTree& tree, const Vec* phi, double y, Rng& rng, bool zero_noise) {
    if (phi != nullptr) {
      const RoutedSample rs = tree.route(*phi, y, h_);
      if (rs.count == h_) {
        const BinNode& b = tree.bin(h_, rs[h_].bin);
        if (b.s_hat > 0.0) {
          const double eta = parent_eta(tree, rs, h_);
          acc_[rs[h_].bin] += eta * std::abs(b.u_hat.dot(rs[h_].phi)) / std::sqrt(b.s_hat);
        }
      }
    }
    if (!zero_noise && any_active_) {
      rng.fill_laplace(noise_.data(), noise_.size());
      simd::active().scaled_accumulate(acc_.data(), noise_.data(), scale_.data(), acc_.size(),
                                       1);
    }
  }

  void finalize(PartitionTree& tree, std::int64_t n) const {
    const LayerParams& p = tree.params();
    const double d = p.d;
    const double rn = std::sqrt(static_cast<double>(n));
    const double threshold = p.kappas.kappa1p * p.gamma * std::pow(d, 1.5) / rn;
    auto& layer = tree.layer_bins(h_);
    for (std::size_t i = 0; i < layer.size(); ++i) {
      BinNode& b = layer[i];
      b.eps_hat = acc_[i];
      if (!b.active || !(b.psi_hat > threshold)) {
        if (b.active) {
          b.active = false;
          b.u_hat.setZero();
          b.theta_hat.setZero();
          b.s_hat = 0.0;
          b.diagnostic = "confidence mass below threshold";
        }
        b.ci_fitted = false;
        continue;
      }
      const double pn = b.psi_hat * static_cast<double>(n);
      // The estimated quantity is nonnegative; negative noise draws are clamped.
      b.eps_bar = std::max(0.0, b.eps_hat) / pn + p.kappas.kappa2 * p.gamma * std::pow(d, 1.5) / (b.psi_hat * rn);
      b.ci_const = p.kappas.kappa3 * p.gamma * p.gamma * std::pow(d + 1.0, 4) / (b.psi_hat * rn);
      b.ci_fitted = true;
    }
  }

 private:
  int h_;
  bool any_active_ = false;
  std::vector<double> acc_, scale_, noise_;
};

}  // namespace detail

void OracleConfig::validate() const {
  layer_params.validate();
  if (n_per_layer < 0) throw std::invalid_argument("n_per_layer must be >= 0");
  if (layer_params.paper_faithful) {
    const double bound = 2.0 * d() *
                         std::log(24.0 * d() / (layer_params.beta * layer_params.delta));
    if (static_cast<double>(n_per_layer) < bound) {
      throw std::invalid_argument("paper-faithful mode needs n_per_layer >= 2d ln(24d/(beta delta))");
    }
  }
}

// ---------------------------------------------------------------------------

OracleEstimate OracleEstimate::constant(double value, double width) {
  return OracleEstimate(value, width);
}

OracleEstimate::OracleEstimate(std::shared_ptr<const PartitionTree> tree)
    : tree_(std::move(tree)) {}

Evaluation OracleEstimate::evaluate(const Vec& phi) const {
  if (tree_) return lplr_aggregate(*tree_, phi);
  return {const_f_, const_delta_, 0};
}

// ---------------------------------------------------------------------------

LayerAccumulator::LayerAccumulator(const LayerParams& params, std::span<const int> shells)
    : bins_(shells.size()), d_(params.d) {
  const std::size_t d = static_cast<std::size_t>(d_);
  c_.assign(bins_, 0.0);
  lambda_.assign(d * bins_, 0.0);
  Lambda_.assign(d * d * bins_, 0.0);
  scale_count_.resize(bins_);
  scale_moment_.resize(bins_);
  scale_wishart_.resize(bins_);
  for (std::size_t b = 0; b < bins_; ++b) {
    const UpdateScales s = update_scales(d_, params.gamma, shells[b], params.alpha.alpha);
    scale_count_[b] = s.count;
    scale_moment_[b] = s.moment;
    scale_wishart_[b] = s.wishart;
  }
  lap_.resize((1 + d) * bins_);
  gauss_.resize((d + 1) * d * bins_);
}

void LayerAccumulator::add(std::size_t bin, const Vec* phi_h, double y_h, Rng& rng,
                           bool zero_noise) {
  const std::size_t d = static_cast<std::size_t>(d_);
  if (phi_h != nullptr) {
    const double y = clip_unit(y_h);
    const Vec& phi = *phi_h;
    c_[bin] += 1.0;
    for (std::size_t c = 0; c < d; ++c) {
      lambda_[c * bins_ + bin] += y * phi[static_cast<Eigen::Index>(c)];
    }
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        Lambda_[(r * d + c) * bins_ + bin] +=
            phi[static_cast<Eigen::Index>(r)] * phi[static_cast<Eigen::Index>(c)];
      }
    }
  }
  if (zero_noise) return;
  const simd::KernelTable& kt = simd::active();
  rng.fill_laplace(lap_.data(), lap_.size());
  kt.scaled_accumulate(c_.data(), lap_.data(), scale_count_.data(), bins_, 1);
  kt.scaled_accumulate(lambda_.data(), lap_.data() + bins_, scale_moment_.data(), bins_, d);
  rng.fill_gaussian(gauss_.data(), gauss_.size());
  kt.wishart_accumulate(Lambda_.data(), gauss_.data(), scale_wishart_.data(), bins_, d, d + 1);
}

void LayerAccumulator::store(std::vector<BinNode>& layer) const {
  const std::size_t d = static_cast<std::size_t>(d_);
  for (std::size_t b = 0; b < bins_; ++b) {
    BinNode& node = layer[b];
    node.c_hat = c_[b];
    node.lambda_hat.resize(d_);
    node.Lambda_hat.resize(d_, d_);
    for (std::size_t r = 0; r < d; ++r) {
      node.lambda_hat[static_cast<Eigen::Index>(r)] = lambda_[r * bins_ + b];
      for (std::size_t c = 0; c < d; ++c) {
        node.Lambda_hat(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            Lambda_[(r * d + c) * bins_ + b];
      }
    }
  }
}

void LayerAccumulator::load(const std::vector<BinNode>& layer) {
  const std::size_t d = static_cast<std::size_t>(d_);
  for (std::size_t b = 0; b < bins_; ++b) {
    const BinNode& node = layer[b];
    c_[b] = node.c_hat;
    for (std::size_t r = 0; r < d; ++r) {
      lambda_[r * bins_ + b] = node.lambda_hat[static_cast<Eigen::Index>(r)];
      for (std::size_t c = 0; c < d; ++c) {
        Lambda_[(r * d + c) * bins_ + b] =
            node.Lambda_hat(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      }
    }
  }
}

void lplr_update(BinNode& bin, const Vec* phi_h, double y_h, const LayerParams& params,
                 Rng& rng, bool zero_noise) {
  if (phi_h != nullptr && phi_h->norm() > params.shell_radius(bin.k) * (1.0 + 1e-9)) {
    throw std::invalid_argument("lplr_update: feature norm exceeds the bin's shell radius");
  }
  const int shells[] = {bin.k};
  LayerAccumulator acc(params, shells);
  std::vector<BinNode> one{bin};
  if (one[0].lambda_hat.size() != params.d) one[0].lambda_hat = Vec::Zero(params.d);
  if (one[0].Lambda_hat.rows() != params.d) one[0].Lambda_hat = Mat::Zero(params.d, params.d);
  acc.load(one);
  acc.add(0, phi_h, y_h, rng, zero_noise);
  acc.store(one);
  bin = std::move(one[0]);
}

// ---------------------------------------------------------------------------

Mat psd_project_orthogonal(const Mat& raw, const Mat& U) {
  const Eigen::Index d = raw.rows();
  if (raw.cols() != d) throw std::invalid_argument("psd_project_orthogonal: matrix not square");
  Mat P = Mat::Identity(d, d);
  if (U.cols() > 0) {
    if (U.rows() != d) throw std::invalid_argument("psd_project_orthogonal: basis has wrong rows");
    const Mat gram = U.transpose() * U;
    if ((gram - Mat::Identity(U.cols(), U.cols())).cwiseAbs().maxCoeff() > 1e-8) {
      throw std::invalid_argument("psd_project_orthogonal: basis is not orthonormal");
    }
    P -= U * U.transpose();
  }
  const Mat sym = (raw + raw.transpose()) * 0.5;
  const Mat projected = P * sym * P;
  Eigen::SelfAdjointEigenSolver<Mat> eig(projected);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("psd_project_orthogonal: eigen-decomposition failed");
  }
  const Mat clipped = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() *
                      eig.eigenvectors().transpose();
  const Mat out = P * clipped * P;
  return (out + out.transpose()) * 0.5;
}

void lplr_pcr(BinNode& bin, std::int64_t n, const Mat& U, const LayerParams& params) {
  const int d = params.d;
  auto deactivate = [&](const char* why) {
    bin.active = false;
    bin.u_hat = Vec::Zero(d);
    bin.s_hat = 0.0;
    bin.theta_hat = Vec::Zero(d);
    if (bin.diagnostic.empty()) bin.diagnostic = why;
  };
  const double nd = static_cast<double>(n);
  bin.psi_hat = n > 0 ? bin.c_hat / nd : 0.0;
  if (!bin.active) return deactivate("inactive");
  if (n <= 0) return deactivate("no samples");
  const double threshold =
      params.kappas.kappa1 * params.gamma * params.gamma * std::pow(d + 1.0, 3) / std::sqrt(nd);
  if (!(bin.psi_hat > threshold)) return deactivate("mass below threshold");
  if (bin.k == params.M) return deactivate("innermost shell");

  const double denom = bin.psi_hat * nd;
  const Mat projected = psd_project_orthogonal(bin.Lambda_hat / denom, U);
  Eigen::SelfAdjointEigenSolver<Mat> eig(projected);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("lplr_pcr: eigen-decomposition failed for bin " +
                             bin.address.to_string());
  }
  const double s = eig.eigenvalues()[d - 1];
  if (!(s > 0.0)) return deactivate("nonpositive top eigenvalue");
  Vec u = eig.eigenvectors().col(d - 1);
  if (U.cols() > 0) u -= U * (U.transpose() * u);
  u /= u.norm();
  for (int i = 0; i < d; ++i) {
    if (std::abs(u[i]) > 1e-12) {
      if (u[i] < 0) u = -u;
      break;
    }
  }
  const Vec lam = bin.lambda_hat / denom;
  const double coef = u.dot(lam) / s;
  bin.u_hat = u;
  bin.s_hat = s;
  bin.theta_hat = u * coef;
}

double eta_hat(const BinNode& bin, const Vec& phi_h, double eta_parent,
               const LayerParams& params) {
  double chi;
  if (bin.ci_fitted) {
    chi = bin.ci_const + bin.eps_bar * std::abs(bin.u_hat.dot(phi_h)) / std::sqrt(bin.s_hat);
  } else {
    chi = params.shell_radius(bin.k);
  }
  return std::min(1.0, eta_parent + chi);
}

void lplr_ci(PartitionTree& tree, int h, std::span<const Sample> samples, std::int64_t n,
             std::uint64_t key, bool zero_noise) {
  detail::CiPass pass(tree, h);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng rng(key, i);
    const Sample& s = samples[i];
    pass.add(tree, s.dummy ? nullptr : &s.phi, s.y, rng, zero_noise);
  }
  pass.finalize(tree, n);
}

Evaluation lplr_aggregate(const PartitionTree& tree, const Vec& phi) {
  if (phi.isZero(0.0)) return {0.0, 0.0, 0};
  const LayerParams& p = tree.params();
  Vec cur = phi;
  double y = 0.0;
  double eta = 0.0;
  std::size_t index = 0;
  int h = 1;
  for (; h <= tree.depth(); ++h) {
    const int k = shell_index(p, cur.norm());
    index = h == 1 ? static_cast<std::size_t>(k) : tree.child_index(h - 1, index, k);
    const BinNode& b = tree.bin(h, index);
    y += cur.dot(b.theta_hat);
    eta = eta_hat(b, cur, eta, p);
    if (b.s_hat == 0.0 || h == tree.depth()) break;
    cur -= b.u_hat * b.u_hat.dot(cur);
  }
  return {clip_unit(y), eta, std::min(h, tree.depth())};
}

// ---------------------------------------------------------------------------

LplrOracle::LplrOracle(const OracleConfig& config, std::uint64_t key)
    : config_(config), key_(key) {
  config_.validate();
  tree_ = std::make_shared<PartitionTree>(config_.layer_params);
  if (config_.n_per_layer == 0) {
    for (int h = 1; h <= config_.d(); ++h) {
      tree_->open_layer();
      for (BinNode& b : tree_->layer_bins(h)) {
        b.active = false;
        b.diagnostic = "no samples";
      }
    }
    return;
  }
  tree_->open_layer();
  std::vector<int> shells;
  for (const BinNode& b : tree_->layer_bins(1)) shells.push_back(b.k);
  acc_ = std::make_unique<LayerAccumulator>(tree_->params(), shells);
}

LplrOracle::~LplrOracle() = default;
LplrOracle::LplrOracle(LplrOracle&&) noexcept = default;
LplrOracle& LplrOracle::operator=(LplrOracle&&) noexcept = default;

std::uint64_t LplrOracle::layer_key(int h, Channel c) const {
  return derive_key(key_, {static_cast<std::uint64_t>(h), channel(c)});
}

void LplrOracle::feed(const Vec& phi, double y) { feed_impl(&phi, y); }

void LplrOracle::feed_dummy() { feed_impl(nullptr, 0.0); }

void LplrOracle::feed_impl(const Vec* phi, double y) {
  if (finalized()) throw std::logic_error("oracle already consumed its sample budget");
  const std::int64_t n = config_.n_per_layer;
  const int h = static_cast<int>(consumed_ / (2 * n)) + 1;
  const std::int64_t pos = consumed_ % (2 * n);
  if (pos < n) {
    Rng rng(layer_key(h, Channel::kUpdate), static_cast<std::uint64_t>(pos));
    bool placed = false;
    if (phi != nullptr) {
      const RoutedSample rs = tree_->route(*phi, y, h);
      if (rs.count == h) {
        acc_->add(rs[h].bin, &rs[h].phi, rs[h].y, rng, config_.zero_noise);
        placed = true;
      }
    }
    if (!placed) acc_->add_dummy(rng, config_.zero_noise);
    ++consumed_;
    if (pos + 1 == n) close_update_batch();
    return;
  }
  Rng rng(layer_key(h, Channel::kCi), static_cast<std::uint64_t>(pos - n));
  ci_->add(*tree_, phi, y, rng, config_.zero_noise);
  ++consumed_;
  if (pos + 1 == 2 * n) close_ci_batch();
}

void LplrOracle::close_update_batch() {
  const int h = tree_->depth();
  acc_->store(tree_->layer_bins(h));
  acc_.reset();
  fit_layer(*tree_, h, config_.n_per_layer);
  if (observer_) observer_(h, *tree_);
  ci_ = std::make_unique<detail::CiPass>(*tree_, h);
}

void LplrOracle::close_ci_batch() {
  const int h = tree_->depth();
  ci_->finalize(*tree_, config_.n_per_layer);
  ci_.reset();
  if (h < config_.d()) {
    tree_->open_layer();
    std::vector<int> shells;
    for (const BinNode& b : tree_->layer_bins(h + 1)) shells.push_back(b.k);
    acc_ = std::make_unique<LayerAccumulator>(tree_->params(), shells);
  }
}

OracleEstimate LplrOracle::estimate() const {
  if (!finalized()) throw std::logic_error("oracle estimate requested before all samples arrived");
  return OracleEstimate(std::const_pointer_cast<const PartitionTree>(
      std::make_shared<PartitionTree>(*tree_)));
}

nlohmann::json LplrOracle::dump() const {
  nlohmann::json j = tree_->to_json();
  j["n_per_layer"] = config_.n_per_layer;
  j["consumed"] = consumed_;
  j["zero_noise"] = config_.zero_noise;
  j["finalized"] = finalized();
  return j;
}

OracleEstimate run_oracle(std::span<const Sample> samples, const OracleConfig& config,
                          std::uint64_t key) {
  LplrOracle oracle(config, key);
  const auto total = static_cast<std::size_t>(config.total_samples());
  if (samples.size() < total) {
    throw std::invalid_argument("sample stream ended before the oracle's budget (" +
                                std::to_string(total) + " samples)");
  }
  for (std::size_t i = 0; i < total; ++i) oracle.feed(samples[i]);
  return oracle.estimate();
}

}  // namespace ldpcb
