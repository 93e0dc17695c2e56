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

#include <cmath>
#include <cstring>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ldpcb/mechanisms.hpp"
#include "ldpcb/runner.hpp"
#include "ldpcb/simd/kernels.hpp"

namespace ldpcb {

namespace {

using nlohmann::json;

constexpr double kZLimit = 5.0;

struct Moments {
  double mean = 0;
  double var = 0;
  double m4 = 0;  // fourth central moment
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) m.mean += x;
  m.mean /= n;
  for (double x : xs) {
    const double c = (x - m.mean) * (x - m.mean);
    m.var += c;
    m.m4 += c * c;
  }
  m.var /= n;
  m.m4 /= n;
  return m;
}

// z-scores of the sample mean and variance against closed forms. The variance
// SE uses the sample fourth moment.
json moment_check(const std::string& name, const std::vector<double>& xs, double mean,
                  double var, bool* ok) {
  const Moments m = moments(xs);
  const double n = static_cast<double>(xs.size());
  const double z_mean = (m.mean - mean) / std::sqrt(var / n);
  const double z_var = (m.var - var) / std::sqrt(std::max(m.m4 - m.var * m.var, 1e-300) / n);
  const bool pass = std::abs(z_mean) <= kZLimit && std::abs(z_var) <= kZLimit;
  *ok = *ok && pass;
  return {{"name", name},   {"mean", m.mean}, {"expected_mean", mean}, {"z_mean", z_mean},
          {"var", m.var},   {"expected_var", var}, {"z_var", z_var},  {"pass", pass}};
}

template <typename F, typename G>
bool same_output(F scalar, G avx2, std::size_t n) {
  std::vector<double> a(n);
  std::vector<double> b(n);
  scalar(a.data());
  avx2(b.data());
  return std::memcmp(a.data(), b.data(), n * sizeof(double)) == 0;
}

json kernel_checks(std::uint64_t seed, bool* ok) {
  json out = json::array();
  const simd::KernelTable& s = simd::scalar_table();
  const simd::KernelTable* v = simd::avx2_table();
  if (v == nullptr) {
    out.push_back({{"name", "avx2_equivalence"}, {"pass", true}, {"skipped", "avx2 unavailable"}});
    return out;
  }
  const simd::StreamAddress addr{seed, 7};
  constexpr std::size_t n = 4099;  // odd length exercises the tails
  bool pass = true;
  for (auto fill : {&simd::KernelTable::fill_uniform, &simd::KernelTable::fill_laplace,
                    &simd::KernelTable::fill_gaussian}) {
    pass = pass && same_output([&](double* o) { (s.*fill)(addr, 3, o, n); },
                               [&](double* o) { (v->*fill)(addr, 3, o, n); }, n);
  }
  const std::size_t bins = 37;
  const std::size_t dim = 3;
  const std::size_t degrees = dim + 1;
  std::vector<double> z(degrees * dim * bins);
  std::vector<double> scales(bins);
  s.fill_gaussian(addr, 100, z.data(), z.size());
  s.fill_uniform(addr, 200, scales.data(), scales.size());
  pass = pass && same_output([&](double* o) {
                   std::fill(o, o + dim * dim * bins, 0.5);
                   s.wishart_accumulate(o, z.data(), scales.data(), bins, dim, degrees);
                 },
                 [&](double* o) {
                   std::fill(o, o + dim * dim * bins, 0.5);
                   v->wishart_accumulate(o, z.data(), scales.data(), bins, dim, degrees);
                 },
                 dim * dim * bins);
  pass = pass && same_output([&](double* o) {
                   std::fill(o, o + dim * bins, -1.0);
                   s.scaled_accumulate(o, z.data(), scales.data(), bins, dim);
                 },
                 [&](double* o) {
                   std::fill(o, o + dim * bins, -1.0);
                   v->scaled_accumulate(o, z.data(), scales.data(), bins, dim);
                 },
                 dim * bins);
  *ok = *ok && pass;
  out.push_back({{"name", "avx2_equivalence"}, {"pass", pass}});
  return out;
}

json certificate_sweep(bool* ok) {
  int checked = 0;
  int failed = 0;
  double worst = 0.0;
  for (int d = 1; d <= 8; ++d) {
    for (double gamma : {2.0, 3.0, 4.0, 8.0, 16.0}) {
      for (int k = 0; k <= 6; ++k) {
        for (double alpha : {0.1, 0.5, 1.0}) {
          const UpdateScales u = update_scales(d, gamma, k, alpha);
          const double gk = std::pow(gamma, -k);
          const RatioCertificate count = verify_density_ratio(u.count, 1.0, alpha / 3.0);
          const RatioCertificate moment =
              verify_density_ratio(u.moment, std::sqrt(static_cast<double>(d)) * gk, alpha / 3.0);
          checked += 2;
          failed += !count.ok + !moment.ok;
          worst = std::max({worst, count.worst_ratio / count.target_ratio,
                            moment.worst_ratio / moment.target_ratio});
          for (double s_hat : {1e-3, 0.1, 1.0}) {
            const RatioCertificate ci =
                verify_density_ratio(ci_scale(gamma, k, s_hat, alpha), gk / std::sqrt(s_hat), alpha);
            ++checked;
            failed += !ci.ok;
            worst = std::max(worst, ci.worst_ratio / ci.target_ratio);
          }
        }
      }
    }
  }
  const bool pass = failed == 0;
  *ok = *ok && pass;
  return {{"name", "density_ratio_sweep"},
          {"checked", checked},
          {"failed", failed},
          {"worst_ratio_over_target", worst},
          {"pass", pass}};
}

}  // namespace

json mechanism_selftest(std::int64_t samples, std::uint64_t seed, bool* ok) {
  bool all = true;
  json checks = json::array();
  const auto n = static_cast<std::size_t>(samples);
  const std::uint64_t key = derive_key(seed, {channel(Channel::kAudit)});

  std::uint64_t stream = 0;
  for (double b : {0.5, 1.0, 3.0}) {
    Rng rng(key, ++stream);
    const Eigen::VectorXd x = sample_laplace(static_cast<int>(n), b, rng);
    checks.push_back(moment_check("laplace_b" + std::to_string(b).substr(0, 3),
                                  std::vector<double>(x.data(), x.data() + n), 0.0, 2 * b * b, &all));
  }

  // Wishart W_d(m, V): E W = m V, Var W_ij = m (V_ij^2 + V_ii V_jj).
  for (int d : {2, 3}) {
    Eigen::MatrixXd V = Eigen::MatrixXd::Identity(d, d);
    V(0, 1) = V(1, 0) = 0.3;
    V(d - 1, d - 1) = 2.0;
    const int m = d + 1;
    Rng rng(key, ++stream);
    std::vector<std::vector<double>> entries(static_cast<std::size_t>(d * d), std::vector<double>(n));
    for (std::size_t s = 0; s < n; ++s) {
      const Eigen::MatrixXd W = sample_wishart(d, m, V, rng);
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) entries[static_cast<std::size_t>(i * d + j)][s] = W(i, j);
      }
    }
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        checks.push_back(moment_check(
            "wishart_d" + std::to_string(d) + "_" + std::to_string(i) + std::to_string(j),
            entries[static_cast<std::size_t>(i * d + j)], m * V(i, j),
            m * (V(i, j) * V(i, j) + V(i, i) * V(j, j)), &all));
      }
    }
  }

  // Centered Wishart noise is mean zero: ||mean||_op against 5 times the
  // Frobenius standard error.
  for (int d : {2, 4}) {
    const PrivacyBudget budget{0.5};
    const double magnitude = 1.0;
    Rng rng(key, ++stream);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t s = 0; s < n; ++s) sum += centered_wishart_noise(d, budget, magnitude, rng);
    sum /= static_cast<double>(n);
    const double sc = magnitude * 1.5 / budget.alpha;
    // Entry variances: (d+1) off the diagonal, 2(d+1) on it.
    const double frob_var = sc * sc * (d + 1) * (d * (d - 1) + 2.0 * d) / static_cast<double>(n);
    const double op = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sum).eigenvalues().cwiseAbs().maxCoeff();
    const double limit = kZLimit * std::sqrt(frob_var);
    const bool pass = op <= limit;
    all = all && pass;
    checks.push_back({{"name", "centered_wishart_mean_d" + std::to_string(d)},
                      {"op_norm", op},
                      {"limit", limit},
                      {"z", op / std::sqrt(frob_var)},
                      {"pass", pass}});
  }

  checks.push_back(certificate_sweep(&all));
  for (json& j : kernel_checks(seed, &all)) checks.push_back(std::move(j));
  if (ok != nullptr) *ok = all;
  return {{"samples", samples}, {"checks", checks}, {"pass", all}};
}

}  // namespace ldpcb
