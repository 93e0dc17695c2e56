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

#include "ldpcb/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "ldpcb/mechanisms.hpp"

namespace ldpcb {

namespace {

void check_dim(int d) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("d out of range");
}

Mat regularized(const Mat& gram, double reg) {
  Mat v = gram;
  v.diagonal().array() += reg;
  return v;
}

// Symmetric solve with an eigenvalue floor when V is not positive definite.
Vec spd_solve(const Mat& V, const Vec& b, double floor) {
  Eigen::LLT<Mat> llt(V);
  if (llt.info() == Eigen::Success) return llt.solve(b);
  Eigen::SelfAdjointEigenSolver<Mat> eig(V);
  const Vec ev = eig.eigenvalues().cwiseMax(floor);
  return eig.eigenvectors() * (ev.cwiseInverse().asDiagonal() * (eig.eigenvectors().transpose() * b));
}

Mat psd_clip(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(Mat(0.5 * (m + m.transpose())));
  const Vec ev = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

Vec project_unit_ball(Vec v) {
  const double n = v.norm();
  if (n > 1.0) v /= n;
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------

Vec ridge_fit(std::span<const Sample> data, int d, double lambda_reg) {
  RidgeOracle r(d, lambda_reg);
  for (const Sample& s : data) {
    if (!s.dummy) r.add(s.phi, s.y);
  }
  return r.theta();
}

RidgeOracle::RidgeOracle(int d, double lambda_reg)
    : lambda_(lambda_reg), gram_(Mat::Zero(d, d)), moment_(Vec::Zero(d)) {
  check_dim(d);
  if (!(lambda_reg > 0.0)) throw std::invalid_argument("ridge regularizer must be positive");
}

void RidgeOracle::add(const Vec& phi, double y) {
  gram_ += phi * phi.transpose();
  moment_ += y * phi;
  ++count_;
}

Vec RidgeOracle::theta() const { return regularized(gram_, lambda_).llt().solve(moment_); }

double RidgeOracle::width(const Vec& phi) const {
  return std::sqrt(phi.dot(regularized(gram_, lambda_).llt().solve(phi)));
}

// ---------------------------------------------------------------------------

IpEstimator parse_ip_estimator(const std::string& s) {
  if (s == "ridge") return IpEstimator::kRidge;
  if (s == "bias_corrected") return IpEstimator::kBiasCorrected;
  throw std::invalid_argument("unknown estimator: " + s);
}

std::string to_string(IpEstimator e) {
  return e == IpEstimator::kRidge ? "ridge" : "bias_corrected";
}

InputPerturbationOracle::InputPerturbationOracle(int d, double alpha, std::uint64_t key)
    : d_(d), alpha_(alpha), key_(derive_key(key, {channel(Channel::kPerturb)})) {
  check_dim(d);
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
}

void InputPerturbationOracle::feed(const Vec& phi, double y) {
  if (phi.size() != d_) throw std::invalid_argument("feature dimension mismatch");
  Rng rng(key_, phi_.size());
  const double scale = 1.0 / alpha_;
  Vec noisy = phi;
  for (int i = 0; i < d_; ++i) noisy[i] += scale * rng.laplace();
  phi_.push_back(std::move(noisy));
  y_.push_back(y + scale * rng.laplace());
}

Vec InputPerturbationOracle::fit(IpEstimator estimator, double lambda_reg) const {
  if (!(lambda_reg > 0.0)) throw std::invalid_argument("ridge regularizer must be positive");
  Mat gram = Mat::Zero(d_, d_);
  Vec moment = Vec::Zero(d_);
  for (std::size_t i = 0; i < phi_.size(); ++i) {
    gram += phi_[i] * phi_[i].transpose();
    moment += y_[i] * phi_[i];
  }
  if (estimator == IpEstimator::kBiasCorrected) {
    const double var = 2.0 / (alpha_ * alpha_);
    gram.diagonal().array() -= var * static_cast<double>(phi_.size());
    gram = psd_clip(gram);
  }
  return project_unit_ball(regularized(gram, lambda_reg).llt().solve(moment));
}

Vec input_perturb_fit(std::span<const Sample> data, int d, double alpha, std::uint64_t key,
                      IpEstimator estimator, double lambda_reg) {
  InputPerturbationOracle o(d, alpha, key);
  for (const Sample& s : data) {
    if (!s.dummy) o.feed(s.phi, s.y);
  }
  return o.fit(estimator, lambda_reg);
}

// ---------------------------------------------------------------------------

SuffstatAccumulator::SuffstatAccumulator(int d, double alpha, std::uint64_t key, bool zero_noise)
    : d_(d), alpha_(alpha), key_(derive_key(key, {channel(Channel::kMechanism)})),
      zero_noise_(zero_noise), gram_(Mat::Zero(d, d)), moment_(Vec::Zero(d)) {
  check_dim(d);
  PrivacyBudget{alpha}.validate();
}

double SuffstatAccumulator::moment_scale() const {
  // Replace-one l1 sensitivity of y phi is 2 sqrt(d); budget alpha / 2.
  return 2.0 * std::sqrt(static_cast<double>(d_)) / (alpha_ / 2.0);
}

double SuffstatAccumulator::wishart_scale() const { return 2.0 * 1.5 / alpha_; }

double SuffstatAccumulator::noise_level(std::int64_t t) const {
  if (zero_noise_) return 0.0;
  const double entry_sd =
      wishart_scale() * std::sqrt(2.0 * (d_ + 1) * static_cast<double>(std::max<std::int64_t>(t, 1)));
  return 2.0 * std::sqrt(static_cast<double>(d_)) * entry_sd;
}

void SuffstatAccumulator::add(const Vec& phi, double y) {
  gram_ += phi * phi.transpose();
  moment_ += y * phi;
  if (!zero_noise_) {
    Rng rng(key_, static_cast<std::uint64_t>(count_));
    const double s = moment_scale();
    for (int i = 0; i < d_; ++i) moment_[i] += s * rng.laplace();
    const Eigen::MatrixXd w = centered_wishart_noise(d_, PrivacyBudget{alpha_}, 2.0, rng);
    gram_ += Mat(w);
  }
  ++count_;
}

Vec suffstat_fit(std::span<const Sample> data, int d, double alpha, std::uint64_t key,
                 double lambda_reg, bool zero_noise) {
  if (!(lambda_reg > 0.0)) throw std::invalid_argument("ridge regularizer must be positive");
  SuffstatAccumulator acc(d, alpha, key, zero_noise);
  for (const Sample& s : data) {
    if (!s.dummy) acc.add(s.phi, s.y);
  }
  const Mat gram = zero_noise ? acc.gram() : psd_clip(acc.gram());
  return project_unit_ball(regularized(gram, lambda_reg).llt().solve(acc.moment()));
}

// ---------------------------------------------------------------------------

void UcbConfig::validate() const {
  check_dim(d);
  if (actions < 1) throw std::invalid_argument("need at least one action");
  if (!zero_noise) PrivacyBudget{alpha}.validate();
  if (!(lambda_reg > 0.0) || !(shift >= 0.0) || !(bonus >= 0.0)) {
    throw std::invalid_argument("ucb constants must be positive");
  }
}

namespace {

// argmax_a phi_a^T theta + bonus ||phi_a||_{V^-1}; ties go to the lowest index.
int optimistic_choice(const Mat& V, const Vec& moment, double floor, double bonus,
                      std::span<const Vec> features) {
  const Vec theta = spd_solve(V, moment, floor);
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < features.size(); ++a) {
    const Vec& phi = features[a];
    const double w = std::sqrt(std::max(0.0, phi.dot(spd_solve(V, phi, floor))));
    const double score = phi.dot(theta) + bonus * w;
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(a);
    }
  }
  return best;
}

}  // namespace

SuffstatUcbPolicy::SuffstatUcbPolicy(const UcbConfig& config, std::uint64_t key)
    : config_(config),
      stats_(config.d, config.zero_noise ? 1.0 : config.alpha, key, config.zero_noise) {
  config_.validate();
}

Mat SuffstatUcbPolicy::design_matrix() const {
  return regularized(stats_.gram(),
                     config_.lambda_reg + config_.shift * stats_.noise_level(stats_.count()));
}

Vec SuffstatUcbPolicy::theta() const {
  return spd_solve(design_matrix(), stats_.moment(), config_.lambda_reg);
}

Decision SuffstatUcbPolicy::decide(std::span<const Vec> features, Rng&) {
  return {optimistic_choice(design_matrix(), stats_.moment(), config_.lambda_reg, config_.bonus,
                            features),
          1, 1};
}

void SuffstatUcbPolicy::record(std::span<const Vec> features, int action, double y) {
  stats_.add(features[static_cast<std::size_t>(action)], y);
}

RidgeUcbPolicy::RidgeUcbPolicy(const UcbConfig& config)
    : config_(config), ridge_(config.d, config.lambda_reg) {
  config_.validate();
}

Decision RidgeUcbPolicy::decide(std::span<const Vec> features, Rng&) {
  return {optimistic_choice(regularized(ridge_.gram(), config_.lambda_reg),
                            ridge_.moment(), config_.lambda_reg, config_.bonus, features),
          1, 1};
}

void RidgeUcbPolicy::record(std::span<const Vec> features, int action, double y) {
  ridge_.add(features[static_cast<std::size_t>(action)], y);
}

// ---------------------------------------------------------------------------

void RidgeElimConfig::validate() const {
  check_dim(d);
  if (actions < 1) throw std::invalid_argument("need at least one action");
  schedule.validate();
  if (!(lambda_reg > 0.0) || !(bonus >= 0.0)) throw std::invalid_argument("bad ridge constants");
}

RidgeEliminationPolicy::RidgeEliminationPolicy(const RidgeElimConfig& config) : config_(config) {
  config_.validate();
  current_.assign(static_cast<std::size_t>(config_.actions),
                  RidgeOracle(config_.d, config_.lambda_reg));
}

Evaluation RidgeEliminationPolicy::evaluate(const Table& t, const Vec& phi) const {
  Evaluation e;
  e.f_hat = std::clamp(phi.dot(t.theta), -1.0, 1.0);
  e.delta = std::min(1.0, config_.bonus * t.oracle.width(phi));
  return e;
}

Decision RidgeEliminationPolicy::decide(std::span<const Vec> features, Rng& rng) {
  const ActiveSets sets = eliminate(config_.actions, epoch_, [&](int tau, int a) {
    if (tau == 1) return Evaluation{0.0, 1.0, 0};
    return evaluate(tables_[static_cast<std::size_t>(tau - 2)][static_cast<std::size_t>(a)],
                    features[static_cast<std::size_t>(a)]);
  });
  return {EliminationPolicy::select_from(sets.last(), rng),
          static_cast<int>(sets.last().size()), epoch_};
}

void RidgeEliminationPolicy::record(std::span<const Vec> features, int action, double y) {
  current_[static_cast<std::size_t>(action)].add(features[static_cast<std::size_t>(action)], y);
  ++t_;
  if (t_ == config_.schedule.start(epoch_ + 1) - 1 && t_ < config_.schedule.T) {
    std::vector<Table> next;
    for (const RidgeOracle& o : current_) next.push_back({o.theta(), o});
    tables_.push_back(std::move(next));
    current_.assign(static_cast<std::size_t>(config_.actions),
                    RidgeOracle(config_.d, config_.lambda_reg));
    ++epoch_;
  }
}

}  // namespace ldpcb
