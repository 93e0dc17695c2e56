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

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "ldpcb/runner.hpp"

namespace ldpcb {

namespace {

// Multinomial counts of `draws` categorical samples.
std::vector<std::int64_t> draw_counts(const std::vector<double>& probs, std::int64_t draws,
                                      Rng& rng) {
  std::vector<double> cdf(probs.size());
  double acc = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) cdf[i] = acc += probs[i];
  std::vector<std::int64_t> counts(probs.size(), 0);
  for (std::int64_t i = 0; i < draws; ++i) {
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    ++counts[std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1)];
  }
  return counts;
}

double op_norm(const Mat& m) {
  const Mat sym = 0.5 * (m + m.transpose());
  return Eigen::SelfAdjointEigenSolver<Mat>(sym, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .cwiseAbs()
      .maxCoeff();
}

}  // namespace

MadEstimate estimate_mad(const std::function<double(const Vec&)>& f, const Vec& theta_star,
                         const DiscreteDesign& design, std::int64_t N, Rng& rng) {
  if (N < 10000) throw std::invalid_argument("estimate_mad needs at least 1e4 draws");
  design.validate();
  // The predictor is evaluated once per atom; draws only pick atoms.
  std::vector<double> err(design.points.size());
  for (std::size_t i = 0; i < err.size(); ++i) {
    err[i] = std::abs(f(design.points[i]) - design.points[i].dot(theta_star));
  }
  const std::vector<std::int64_t> counts = draw_counts(design.probs, N, rng);
  double sum = 0;
  double sq = 0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    sum += static_cast<double>(counts[i]) * err[i];
    sq += static_cast<double>(counts[i]) * err[i] * err[i];
  }
  const double n = static_cast<double>(N);
  MadEstimate out;
  out.mean = sum / n;
  const double var = std::max(0.0, sq / n - out.mean * out.mean);
  out.std_error = N > 1 ? std::sqrt(var / (n - 1)) : 0.0;
  return out;
}

MadEstimate estimate_mad(const Vec& theta_hat, const Vec& theta_star, const DiscreteDesign& design,
                         std::int64_t N, Rng& rng) {
  return estimate_mad([&](const Vec& phi) { return phi.dot(theta_hat); }, theta_star, design, N,
                      rng);
}

SlopeFit fit_loglog_slope(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("length mismatch");
  if (xs.size() < 4) throw std::invalid_argument("need at least 4 points");
  const double n = static_cast<double>(xs.size());
  double mx = 0;
  double my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw std::invalid_argument("values must be positive");
    mx += std::log(xs[i]);
    my += std::log(ys[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0;
  double sxy = 0;
  double syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = std::log(xs[i]) - mx;
    const double dy = std::log(ys[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw std::invalid_argument("x values must not all be equal");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

CoverageResult coverage_audit(std::span<const OracleEstimate> runs, const Vec& theta_star,
                              std::span<const Vec> test_grid) {
  CoverageResult out;
  if (runs.empty()) return out;
  int covered = 0;
  for (const OracleEstimate& run : runs) {
    double worst = 0.0;
    for (const Vec& phi : test_grid) {
      const Evaluation e = run.evaluate(phi);
      worst = std::max(worst, std::abs(e.f_hat - phi.dot(theta_star)) - e.delta);
    }
    out.max_violation.push_back(worst);
    covered += worst <= 0.0;
  }
  out.rate = static_cast<double>(covered) / static_cast<double>(runs.size());
  return out;
}

// ---------------------------------------------------------------------------

bool Lemma2Bin::ok() const {
  if (psi_residual > psi_bound) return false;
  if (lambda_applies && !(lambda_residual <= lambda_bound)) return false;
  if (Lambda_applies && !(Lambda_residual <= Lambda_bound)) return false;
  return true;
}

int VerificationReport::lemma2_ok_runs() const {
  int ok = 0;
  for (const auto& run : runs) {
    ok += std::all_of(run.begin(), run.end(), [](const Lemma2Bin& b) { return b.ok(); });
  }
  return ok;
}

int VerificationReport::lemma2_required(double delta) const {
  const double R = static_cast<double>(runs.size());
  return static_cast<int>(std::ceil((1.0 - delta) * R - 3.0 * std::sqrt(delta * R)));
}

nlohmann::json VerificationReport::to_json() const {
  std::int64_t bins = 0;
  std::int64_t lambda_checked = 0;
  std::int64_t Lambda_checked = 0;
  double worst_psi_ratio = 0;
  for (const auto& run : runs) {
    for (const Lemma2Bin& b : run) {
      ++bins;
      lambda_checked += b.lambda_applies;
      Lambda_checked += b.Lambda_applies;
      worst_psi_ratio = std::max(worst_psi_ratio, b.psi_residual / b.psi_bound);
    }
  }
  return {{"runs", runs.size()},
          {"bins_checked", bins},
          {"lambda_checks", lambda_checked},
          {"Lambda_checks", Lambda_checked},
          {"worst_psi_residual_over_bound", worst_psi_ratio},
          {"lemma2_ok_runs", lemma2_ok_runs()},
          {"coverage_rate", coverage_rate},
          {"mad", mad}};
}

void attach_lemma2_observer(LplrOracle& oracle, std::vector<StreamAtom> law, std::int64_t draws,
                            std::uint64_t key, std::vector<Lemma2Bin>* out) {
  const std::int64_t n = oracle.config().n_per_layer;
  oracle.set_layer_observer([law = std::move(law), draws, key, out, n](
                                int h, const PartitionTree& tree) {
    const LayerParams& p = tree.params();
    std::vector<double> probs;
    for (const StreamAtom& a : law) probs.push_back(a.prob);
    Rng rng(derive_key(key, {static_cast<std::uint64_t>(h), channel(Channel::kAudit)}));
    const std::vector<std::int64_t> counts = draw_counts(probs, draws, rng);

    const std::size_t bins = tree.layer_size(h);
    const int d = p.d;
    std::vector<double> mass(bins, 0.0);
    std::vector<Vec> lam(bins, Vec::Zero(d));
    std::vector<Mat> Lam(bins, Mat::Zero(d, d));
    for (std::size_t i = 0; i < law.size(); ++i) {
      if (law[i].dummy || counts[i] == 0) continue;
      const RoutedSample rs = tree.route(law[i].phi, law[i].y, h);
      if (rs.count < h) continue;  // stopped in an innermost shell earlier
      const LayerRecord& r = rs[h];
      const double w = static_cast<double>(counts[i]);
      const double y = std::clamp(r.y, -1.0, 1.0);
      mass[r.bin] += w;
      lam[r.bin] += w * y * r.phi;
      Lam[r.bin] += w * r.phi * r.phi.transpose();
    }

    const double alpha = p.alpha.alpha;
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    const double L = std::log(48.0 * d / (p.beta * p.delta));
    const double L24 = std::log(24.0 * d / (p.beta * p.delta));
    const double L48 = std::log(48.0 * d / p.delta);
    const bool n_ok = static_cast<double>(n) >= 2.0 * d * L24;
    for (std::size_t b = 0; b < bins; ++b) {
      const BinNode& node = tree.bin(h, b);
      Lemma2Bin row;
      row.layer = h;
      row.address = node.address.to_string();
      row.psi = mass[b] / static_cast<double>(draws);
      const double psi_hat = node.c_hat / static_cast<double>(n);
      row.psi_residual = std::abs(psi_hat - row.psi);
      row.psi_bound = 6.2 * d * L / (alpha * sqrt_n);
      const double dd = d;
      row.lambda_applies = n_ok && row.psi >= 18.0 * dd * dd * L / (alpha * sqrt_n);
      row.Lambda_applies =
          n_ok && row.psi >= 18.0 * std::pow(dd + 1, 3) * L24 / (alpha * sqrt_n);
      const double gk = p.shell_radius(node.k);
      if (row.psi > 0.0) {
        row.lambda_bound = (19 * dd * dd + 29 * dd) * gk * L / (alpha * row.psi * sqrt_n);
        row.Lambda_bound =
            (7 * std::pow(dd + 1, 3) + 29 * dd) * gk * gk * L48 / (alpha * row.psi * sqrt_n);
      }
      if (mass[b] > 0.0 && psi_hat > 0.0) {
        const Vec lam_true = lam[b] / mass[b];
        const Mat Lam_true = Lam[b] / mass[b];
        row.lambda_residual = (node.lambda_hat / (psi_hat * n) - lam_true).norm();
        row.Lambda_residual = op_norm(node.Lambda_hat / (psi_hat * n) - Lam_true);
      } else {
        row.lambda_residual = std::numeric_limits<double>::infinity();
        row.Lambda_residual = std::numeric_limits<double>::infinity();
      }
      out->push_back(row);
    }
  });
}

// ---------------------------------------------------------------------------

namespace gates {

bool mad_rate(double lplr_slope) { return lplr_slope >= kMadSlopeLo && lplr_slope <= kMadSlopeHi; }

bool ip_floor(double best_ip_slope, double lplr_slope) {
  return best_ip_slope >= kIpFloor && best_ip_slope >= lplr_slope + kIpMargin;
}

bool mse_floor(std::span<const double> private_slopes) {
  return std::all_of(private_slopes.begin(), private_slopes.end(),
                     [](double s) { return s >= kMseFloor; });
}

bool coverage(double rate) { return rate >= kCoverage; }

bool regret_separation(double lplr_slope, double suffstat_slope) {
  return lplr_slope <= kRegretSlope && lplr_slope <= suffstat_slope - kRegretMargin;
}

}  // namespace gates

}  // namespace ldpcb
