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

// Experiment harness: configuration, replication fan-out, analytics and
// persistence.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ldpcb/baselines.hpp"
#include "ldpcb/elimination.hpp"
#include "ldpcb/environments.hpp"
#include "ldpcb/lplr.hpp"

namespace ldpcb {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { kRegretCurve, kMadCurve, kMseLowerBound, kCoverageAudit, kSelftest };

ExperimentKind parse_experiment_kind(const std::string& s);
std::string to_string(ExperimentKind kind);

enum class PolicyKind { kLplrElimination, kSuffstatUcb, kNonprivateRidgeElim };

PolicyKind parse_policy_kind(const std::string& s);
std::string to_string(PolicyKind kind);

// Offline estimators compared by mad_curve and mse_lower_bound.
enum class EstimatorKind { kLplr, kIpRidge, kIpBiasCorrected, kSuffstat, kRidge };

EstimatorKind parse_estimator_kind(const std::string& s);
std::string to_string(EstimatorKind kind);
bool is_private(EstimatorKind kind);

struct PolicySpec {
  PolicyKind kind = PolicyKind::kLplrElimination;
  std::int64_t n0 = 0;  // 0: d^2 ln(d T / beta)
  double lambda_reg = 1.0;
  double bonus = 1.0;
  double shift = 1.0;
  bool inject_exact = false;  // f_hat = f*, delta = 0 in every table
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kSelftest;
  std::uint64_t seed = 1;
  int replications = 1;
  int threads = 1;
  std::string out_dir = "out";
  bool zero_noise = false;
  bool require_privacy = true;
  bool paper_faithful = false;

  double alpha = 1.0;
  double beta = 0.1;
  double delta = 0.05;
  // Calibrated for coverage at alpha = 1, d = 2; the analysis constants
  // (LayerParams::paper_kappas) deactivate every bin at these sample sizes.
  Kappas kappas{0.1, 0.1, 1.5, 0.005};

  // T values (regret_curve) or sample counts (everything else).
  std::vector<std::int64_t> grid;

  nlohmann::json env;     // regret_curve, coverage_audit
  nlohmann::json design;  // mad_curve, mse_lower_bound: {"kind", "theta"}
  std::vector<PolicySpec> policies;
  std::vector<EstimatorKind> estimators;

  double ridge_lambda = 1.0;
  std::int64_t mad_draws = 100000;
  std::int64_t truth_draws = 1000000;
  std::int64_t policy_horizon = 0;  // coverage_audit policy part; 0 skips it
  // Horizon T that sets gamma = T^beta for offline oracles; 0 uses the largest
  // grid value so every grid point shares one partition.
  std::int64_t oracle_horizon = 0;
  std::int64_t trace_stride = 1;
  std::int64_t selftest_samples = 100000;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  // Throws ConfigError.
  void validate() const;
  double oracle_T() const;
  // FNV-1a over the canonical JSON dump.
  std::string hash() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Analytics

struct MadEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

// Mean of |phi^T (theta_hat - theta_star)| over N fresh draws from the design.
MadEstimate estimate_mad(const Vec& theta_hat, const Vec& theta_star, const DiscreteDesign& design,
                         std::int64_t N, Rng& rng);
// The same for an arbitrary predictor f.
MadEstimate estimate_mad(const std::function<double(const Vec&)>& f, const Vec& theta_star,
                         const DiscreteDesign& design, std::int64_t N, Rng& rng);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Least squares of ln y on ln x. Needs >= 4 points, all positive.
SlopeFit fit_loglog_slope(std::span<const double> xs, std::span<const double> ys);

struct CoverageResult {
  double rate = 0.0;
  std::vector<double> max_violation;  // per run, (|f_hat - f*| - delta)_+
};

// A run is covered when |f_hat(phi) - phi^T theta| <= delta(phi) on the whole
// grid.
CoverageResult coverage_audit(std::span<const OracleEstimate> runs, const Vec& theta_star,
                              std::span<const Vec> test_grid);

// Per-layer Lemma-2 residuals of one oracle run against conditionals computed
// from `draws` fresh samples routed through the frozen tree.
struct Lemma2Bin {
  int layer = 0;
  std::string address;
  double psi = 0.0;
  double psi_residual = 0.0;
  double lambda_residual = 0.0;
  double Lambda_residual = 0.0;
  double psi_bound = 0.0;
  double lambda_bound = 0.0;
  double Lambda_bound = 0.0;
  bool lambda_applies = false;
  bool Lambda_applies = false;
  bool ok() const;
};

struct VerificationReport {
  std::vector<std::vector<Lemma2Bin>> runs;
  double coverage_rate = 0.0;
  double mad = 0.0;  // mean E[delta(phi)] over runs
  // Runs where every applicable inequality held in every bin.
  int lemma2_ok_runs() const;
  int lemma2_required(double delta) const;  // ceil((1 - delta) R - 3 sqrt(delta R))
  nlohmann::json to_json() const;
};

// Installs an observer on `oracle` that appends one run's Lemma-2 rows to
// `out`. `law` yields the stream's law: (phi, y) atoms with probabilities; a
// zero-feature atom stands for the dummy sample.
struct StreamAtom {
  Vec phi;
  double y = 0.0;
  double prob = 0.0;
  bool dummy = false;
};
void attach_lemma2_observer(LplrOracle& oracle, std::vector<StreamAtom> law, std::int64_t draws,
                            std::uint64_t key, std::vector<Lemma2Bin>* out);

// ---------------------------------------------------------------------------
// Gates, exactly as the acceptance criteria state them.

namespace gates {
inline constexpr double kMadSlopeLo = -0.65;
inline constexpr double kMadSlopeHi = -0.35;
inline constexpr double kIpFloor = -0.42;
inline constexpr double kIpMargin = 0.08;
inline constexpr double kMseFloor = -0.65;
inline constexpr double kCoverage = 0.90;
inline constexpr double kRegretSlope = 0.75;
inline constexpr double kRegretMargin = 0.05;

bool mad_rate(double lplr_slope);
bool ip_floor(double best_ip_slope, double lplr_slope);
bool mse_floor(std::span<const double> private_slopes);
bool coverage(double rate);
bool regret_separation(double lplr_slope, double suffstat_slope);
}  // namespace gates

// ---------------------------------------------------------------------------
// Execution

struct TraceRow {
  std::int64_t t = 0;
  double cum_regret = 0.0;
  int active_set_size = 0;
  int epoch = 1;
};

struct RegretTrace {
  std::vector<TraceRow> rows;
  double final_regret = 0.0;
  bool ci_valid = true;          // every fitted table covered the full grid
  std::int64_t retention_violations = 0;
  std::int64_t nesting_violations = 0;
  std::int64_t gap_violations = 0;  // Lemma 1 property 2
  std::int64_t reduced_periods = 0;  // periods whose final active set dropped an action
};

// One bandit run of `policy` on `env` for T periods.
RegretTrace run_bandit(const ExperimentConfig& config, const PolicySpec& policy,
                       const LinearEnv& env, std::int64_t T, int replication, bool audit);

// Runs `tasks` jobs on `threads` workers; results are placed by index.
void parallel_for(std::size_t tasks, int threads, const std::function<void(std::size_t)>& fn);

struct RunResult {
  nlohmann::json summary;
  bool gates_ok = true;
  std::vector<std::filesystem::path> files;
};

// Writes CSVs and summary.json under config.out_dir. Partial outputs are
// removed on failure.
RunResult run_experiment(const ExperimentConfig& config);

// Mechanism moment, certificate and kernel checks.
nlohmann::json mechanism_selftest(std::int64_t samples, std::uint64_t seed, bool* ok);

// Merges summaries into one comparison table (rows of experiment, key, value).
std::string report_table(std::span<const nlohmann::json> summaries);

}  // namespace ldpcb
