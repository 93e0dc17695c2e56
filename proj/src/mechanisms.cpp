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

#include "ldpcb/mechanisms.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ldpcb {

void PrivacyBudget::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("privacy budget alpha must lie in (0, 1]");
  }
}

void NoiseSpec::validate() const {
  if (!(scale > 0.0)) throw std::invalid_argument("noise scale must be positive");
  if (dim < 1) throw std::invalid_argument("noise dimension must be >= 1");
  if (kind == NoiseKind::kLaplaceScalar && dim != 1) {
    throw std::invalid_argument("scalar Laplace noise has dimension 1");
  }
  if (kind == NoiseKind::kWishart && degrees <= dim) {
    throw std::invalid_argument("Wishart degrees must exceed the dimension");
  }
}

Eigen::VectorXd sample_laplace(int dim, double scale, Rng& rng) {
  if (dim < 1) throw std::invalid_argument("sample_laplace: dim must be >= 1");
  if (!(scale > 0.0)) throw std::invalid_argument("sample_laplace: scale must be positive");
  Eigen::VectorXd v(dim);
  rng.fill_laplace(v.data(), static_cast<std::size_t>(dim));
  return v * scale;
}

Eigen::MatrixXd sample_wishart(int dim, int degrees, const Eigen::MatrixXd& scale_matrix,
                               Rng& rng) {
  if (dim < 1 || degrees <= dim) {
    throw std::invalid_argument("sample_wishart: need dim >= 1 and degrees > dim");
  }
  if (scale_matrix.rows() != dim || scale_matrix.cols() != dim) {
    throw std::invalid_argument("sample_wishart: scale matrix has wrong shape");
  }
  const double tol = 1e-12 * std::max(1.0, scale_matrix.cwiseAbs().maxCoeff());
  if ((scale_matrix - scale_matrix.transpose()).cwiseAbs().maxCoeff() > tol) {
    throw std::invalid_argument("sample_wishart: scale matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scale_matrix);
  if (eig.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
    throw std::invalid_argument("sample_wishart: scale matrix is indefinite");
  }
  // V = L L^T with L = Q diag(sqrt(max(lambda, 0))); handles singular V.
  const Eigen::MatrixXd root =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  std::vector<double> g(static_cast<std::size_t>(dim) * degrees);
  rng.fill_gaussian(g.data(), g.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(dim, dim);
  for (int j = 0; j < degrees; ++j) {
    const Eigen::VectorXd x = root * Eigen::Map<const Eigen::VectorXd>(&g[j * dim], dim);
    w.noalias() += x * x.transpose();
  }
  return w;
}

Eigen::MatrixXd centered_wishart_noise(int d, const PrivacyBudget& budget, double magnitude,
                                       Rng& rng) {
  budget.validate();
  if (d < 1) throw std::invalid_argument("centered_wishart_noise: d must be >= 1");
  if (!(magnitude >= 0.0)) {
    throw std::invalid_argument("centered_wishart_noise: magnitude must be >= 0");
  }
  const std::size_t dim = static_cast<std::size_t>(d);
  const std::size_t degrees = dim + 1;
  std::vector<double> g(degrees * dim);
  rng.fill_gaussian(g.data(), g.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  // Row-major and column-major agree: the kernel output is symmetric.
  const double scale = magnitude * (1.5 / budget.alpha);
  simd::active().wishart_accumulate(out.data(), g.data(), &scale, 1, dim, degrees);
  return out;
}

RatioCertificate verify_density_ratio(double scale, double sensitivity, double alpha_target) {
  if (!(scale > 0.0) || !(sensitivity > 0.0)) {
    throw std::invalid_argument("verify_density_ratio: scale and sensitivity must be positive");
  }
  // log f(v - a) - log f(v - b) = (|v - b| - |v - a|) / scale; scan shifts in
  // [0, sensitivity] against outputs spanning both sides of the inputs.
  constexpr int kShifts = 16;
  constexpr int kOutputs = 64;
  double worst_log = 0.0;
  for (int i = 0; i <= kShifts; ++i) {
    const double shift = sensitivity * i / kShifts;
    for (int j = 0; j <= kOutputs; ++j) {
      const double v = -2.0 * sensitivity + 4.0 * sensitivity * j / kOutputs;
      const double log_ratio = (std::abs(v - shift) - std::abs(v)) / scale;
      worst_log = std::max(worst_log, std::abs(log_ratio));
    }
  }
  RatioCertificate cert;
  cert.worst_ratio = std::exp(worst_log);
  cert.target_ratio = std::exp(alpha_target);
  // Both sides are closed-form; allow only rounding in the last few ulps.
  cert.ok = worst_log <= alpha_target * (1.0 + 1e-12);
  return cert;
}

UpdateScales update_scales(int d, double gamma, int k, double alpha) {
  const double shell = std::pow(gamma, -k);
  return {3.0 / alpha, 3.0 * std::sqrt(static_cast<double>(d)) * shell / alpha,
          3.0 * shell * shell * (1.5 / alpha)};
}

double ci_scale(double gamma, int k, double s_hat, double alpha) {
  return std::pow(gamma, -k) / std::sqrt(s_hat) / alpha;
}

}  // namespace ldpcb
