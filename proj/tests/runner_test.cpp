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

#include "ldpcb/runner.hpp"

#include <gtest/gtest.h>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ldpcb {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ldpcb_runner_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(SlopeTest, IdentityHasSlopeOne) {
  const std::vector<double> xs = {1, 10, 100, 1000, 10000};
  const SlopeFit f = fit_loglog_slope(xs, xs);
  EXPECT_NEAR(f.slope, 1.0, 1e-12);
  EXPECT_NEAR(f.intercept, 0.0, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
}

TEST(SlopeTest, InverseSquareRoot) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (double x = 1024; x <= 1 << 20; x *= 2) {
    xs.push_back(x);
    ys.push_back(3.7 / std::sqrt(x));
  }
  EXPECT_NEAR(fit_loglog_slope(xs, ys).slope, -0.5, 1e-12);
}

TEST(SlopeTest, PerturbedPowerLaw) {
  Rng rng(derive_key(5, {1}));
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (double x = 1000; x <= 1e6; x *= 2) {
      xs.push_back(x);
      ys.push_back(0.3 * std::pow(x, 0.75) * (1.0 + 0.02 * (rng.uniform() - 0.5)));
    }
    const double s = fit_loglog_slope(xs, ys).slope;
    EXPECT_GE(s, 0.73);
    EXPECT_LE(s, 0.77);
  }
}

TEST(SlopeTest, RejectsBadInput) {
  const std::vector<double> ok = {1, 2, 3, 4};
  EXPECT_THROW(fit_loglog_slope(ok, std::vector<double>{1, 2, 0, 4}), std::invalid_argument);
  EXPECT_THROW(fit_loglog_slope(std::vector<double>{1, 2, -3, 4}, ok), std::invalid_argument);
  EXPECT_THROW(fit_loglog_slope(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}),
               std::invalid_argument);
  EXPECT_THROW(fit_loglog_slope(std::vector<double>{2, 2, 2, 2}, ok), std::invalid_argument);
}

TEST(MadTest, ExactEstimateIsZero) {
  const DiscreteDesign design = HardDesign::make(HardKind::kMadThm2, 1e4, 1.0).design();
  Rng rng(derive_key(1, {2}));
  const Vec theta = vec2(0.3, -0.2);
  const MadEstimate m = estimate_mad(theta, theta, design, 10000, rng);
  EXPECT_EQ(m.mean, 0.0);
  EXPECT_EQ(m.std_error, 0.0);
}

TEST(MadTest, TwoPointDesignIsExact) {
  DiscreteDesign design;
  design.points = {vec2(0.6, 0.2), vec2(-0.6, -0.2)};
  design.probs = {0.5, 0.5};
  const Vec w = vec2(0.1, -0.4);
  Rng rng(derive_key(1, {3}));
  const MadEstimate m = estimate_mad(w, Vec::Zero(2), design, 20000, rng);
  EXPECT_NEAR(m.mean, std::abs(0.6 * 0.1 - 0.2 * 0.4), 1e-15);
  EXPECT_NEAR(m.std_error, 0.0, 1e-15);
}

TEST(MadTest, MseDesignSecondCoordinateError) {
  const double n = 1e4;
  const HardDesign h = HardDesign::make(HardKind::kMseThm1, n, 1.0);
  Rng rng(derive_key(1, {4}));
  const MadEstimate m = estimate_mad(vec2(0, 1), vec2(0, 0), h.design(), 1000000, rng);
  EXPECT_LE(std::abs(m.mean - h.c / std::sqrt(n)), 3.0 * m.std_error);
}

TEST(MadTest, RejectsTooFewDraws) {
  const DiscreteDesign design = HardDesign::make(HardKind::kMadThm2, 1e4, 1.0).design();
  Rng rng(1);
  EXPECT_THROW(estimate_mad(vec2(0, 0), vec2(0, 0), design, 9999, rng), std::invalid_argument);
}

LayerParams small_params(double T) {
  return LayerParams::make(2, T, 0.25, 1.0, 0.05, Kappas{0.05, 0.05, 0.05, 0.05}, false);
}

TEST(CoverageTest, ZeroNoiseCoversEverything) {
  const Vec theta = vec2(0.5, 0.4);
  const LinearEnv env = random_grid_env(2, 2, 6, 3, NoiseModel{RewardNoise::kNone, 0.0});
  std::vector<OracleEstimate> runs;
  std::vector<Vec> grid;
  for (std::size_t x = 0; x < env.context_count(); ++x) grid.push_back(env.features(x)[0]);
  for (int r = 0; r < 5; ++r) {
    OracleConfig oc{small_params(4096), 1024, true};
    LplrOracle oracle(oc, derive_key(9, {static_cast<std::uint64_t>(r)}));
    Rng rng(derive_key(10, {static_cast<std::uint64_t>(r)}));
    while (!oracle.finalized()) {
      const Vec& phi = grid[rng.below(grid.size())];
      oracle.feed(phi, phi.dot(theta));
    }
    runs.push_back(oracle.estimate());
  }
  const CoverageResult c = coverage_audit(runs, theta, grid);
  EXPECT_EQ(c.rate, 1.0);
  for (double v : c.max_violation) EXPECT_LE(v, 0.0);
}

TEST(CoverageTest, OriginIsNeverAViolation) {
  const Vec theta = vec2(0.9, 0.1);
  std::vector<OracleEstimate> runs;
  for (int r = 0; r < 3; ++r) {
    OracleConfig oc{small_params(4096), 1024, false};
    LplrOracle oracle(oc, derive_key(11, {static_cast<std::uint64_t>(r)}));
    Rng rng(derive_key(12, {static_cast<std::uint64_t>(r)}));
    while (!oracle.finalized()) oracle.feed(vec2(0.7, 0.1), rng.uniform() < 0.5 ? 1.0 : -1.0);
    runs.push_back(oracle.estimate());
    const Evaluation e = runs.back().evaluate(Vec::Zero(2));
    EXPECT_EQ(e.f_hat, 0.0);
    EXPECT_EQ(e.delta, 0.0);
  }
  const std::vector<Vec> grid = {Vec::Zero(2)};
  EXPECT_EQ(coverage_audit(runs, theta, grid).rate, 1.0);
}

TEST(GateTest, Thresholds) {
  EXPECT_TRUE(gates::mad_rate(-0.5));
  EXPECT_TRUE(gates::mad_rate(-0.65));
  EXPECT_FALSE(gates::mad_rate(-0.66));
  EXPECT_FALSE(gates::mad_rate(-0.3));
  EXPECT_TRUE(gates::ip_floor(-0.33, -0.5));
  EXPECT_FALSE(gates::ip_floor(-0.45, -0.6));
  EXPECT_FALSE(gates::ip_floor(-0.40, -0.45));
  const std::vector<double> good = {-0.5, -0.6};
  const std::vector<double> bad = {-0.5, -0.7};
  EXPECT_TRUE(gates::mse_floor(good));
  EXPECT_FALSE(gates::mse_floor(bad));
  EXPECT_TRUE(gates::coverage(0.9));
  EXPECT_FALSE(gates::coverage(0.89));
  EXPECT_TRUE(gates::regret_separation(0.70, 0.80));
  EXPECT_FALSE(gates::regret_separation(0.80, 0.95));
  EXPECT_FALSE(gates::regret_separation(0.74, 0.60));
  EXPECT_FALSE(gates::regret_separation(0.80, 0.78));
}

TEST(VerificationReportTest, RequiredRuns) {
  VerificationReport r;
  r.runs.resize(200);
  EXPECT_EQ(r.lemma2_required(0.05), static_cast<int>(std::ceil(190 - 3 * std::sqrt(10.0))));
}

json regret_config(const fs::path& out) {
  return {{"experiment", "regret_curve"},
          {"seed", 7},
          {"replications", 2},
          {"out_dir", out.string()},
          {"grid", {2000, 4000}},
          {"env", {{"kind", "grid"}, {"d", 2}, {"actions", 2}, {"contexts", 4}}},
          {"policies", {"suffstat_ucb", "nonprivate_ridge_elim"}},
          {"trace_stride", 100}};
}

TEST(ConfigTest, RoundTripAndHash) {
  const ExperimentConfig c = ExperimentConfig::from_json(regret_config("/tmp/x"));
  EXPECT_NO_THROW(c.validate());
  const ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
  json other = regret_config("/tmp/elsewhere");
  other["threads"] = 3;
  EXPECT_EQ(ExperimentConfig::from_json(other).hash(), c.hash());
  other["seed"] = 8;
  EXPECT_NE(ExperimentConfig::from_json(other).hash(), c.hash());
}

TEST(ConfigTest, Rejections) {
  auto rejects = [](json j) {
    EXPECT_THROW(ExperimentConfig::from_json(j).validate(), ConfigError) << j.dump();
  };
  json base = regret_config("/tmp/x");
  json j = base;
  j["bogus"] = 1;
  rejects(j);
  j = base;
  j["experiment"] = "regret";
  rejects(j);
  j = base;
  j["alpha"] = 0.0;
  rejects(j);
  j = base;
  j["alpha"] = 1.5;
  rejects(j);
  j = base;
  j["replications"] = 0;
  rejects(j);
  j = base;
  j["grid"] = {4000, 2000};
  rejects(j);
  j = base;
  j["policies"] = json::array();
  rejects(j);
  j = base;
  j["policies"] = {"thompson"};
  rejects(j);
  j = base;
  j["zero_noise"] = true;
  rejects(j);
  j = base;
  j["seed"] = "seven";
  rejects(j);
  j = base;
  j["env"]["kind"] = "torus";
  rejects(j);
  json m = {{"experiment", "mad_curve"},
            {"grid", {1024, 2048, 4096, 8192}},
            {"design", {{"kind", "mad_thm2"}}},
            {"estimators", {"lplr"}},
            {"mad_draws", 100}};
  rejects(m);
  m["mad_draws"] = 100000;
  EXPECT_NO_THROW(ExperimentConfig::from_json(m).validate());
  m["design"]["kind"] = "nope";
  rejects(m);
  json cov = {{"experiment", "coverage_audit"},
              {"grid", {4096}},
              {"env", {{"kind", "grid"}}},
              {"truth_draws", 1000}};
  rejects(cov);
}

TEST(ConfigTest, ZeroNoiseAllowedWithoutPrivacy) {
  json j = regret_config("/tmp/x");
  j["zero_noise"] = true;
  j["require_privacy"] = false;
  EXPECT_NO_THROW(ExperimentConfig::from_json(j).validate());
}

TEST(RunTest, RegretOutputsAreDeterministic) {
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  json ja = regret_config(a);
  json jb = regret_config(b);
  jb["threads"] = 2;
  const RunResult ra = run_experiment(ExperimentConfig::from_json(ja));
  const RunResult rb = run_experiment(ExperimentConfig::from_json(jb));
  ASSERT_EQ(ra.files.size(), rb.files.size());
  ASSERT_EQ(ra.files.size(), 2u * 2u * 2u + 1u);
  for (std::size_t i = 0; i < ra.files.size(); ++i) {
    EXPECT_EQ(ra.files[i].filename(), rb.files[i].filename());
    EXPECT_EQ(slurp(ra.files[i]), slurp(rb.files[i])) << ra.files[i];
  }
  EXPECT_FALSE(fs::exists(a / (".staging-" + ExperimentConfig::from_json(ja).hash())));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(RunTest, TracesAreMonotone) {
  const fs::path out = scratch("mono");
  const RunResult r = run_experiment(ExperimentConfig::from_json(regret_config(out)));
  int traces = 0;
  for (const fs::path& p : r.files) {
    if (p.extension() != ".csv") continue;
    ++traces;
    std::istringstream in(slurp(p));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,cum_regret,active_set_size,epoch");
    std::int64_t last_t = 0;
    double last_r = 0;
    while (std::getline(in, line)) {
      std::int64_t t = 0;
      double reg = 0;
      ASSERT_EQ(std::sscanf(line.c_str(), "%" SCNd64 ",%lf", &t, &reg), 2);
      EXPECT_GT(t, last_t);
      EXPECT_GE(reg, last_r);
      last_t = t;
      last_r = reg;
    }
  }
  EXPECT_EQ(traces, 8);
  EXPECT_EQ(r.summary.at("config_hash"), ExperimentConfig::from_json(regret_config(out)).hash());
  fs::remove_all(out);
}

TEST(RunTest, ExactTablesGiveZeroRegret) {
  const fs::path out = scratch("exact");
  json j = regret_config(out);
  j["zero_noise"] = true;
  j["require_privacy"] = false;
  j["grid"] = {3000};
  j["replications"] = 3;
  j["policies"] = {{{"kind", "lplr_elimination"}, {"inject_exact", true}}};
  const RunResult r = run_experiment(ExperimentConfig::from_json(j));
  EXPECT_TRUE(r.summary.at("gates").at("exact_tables_zero_regret").get<bool>());
  for (double f : r.summary.at("results").at("lplr_elimination_exact").at("points")[0].at("finals")) {
    EXPECT_EQ(f, 0.0);
  }
  fs::remove_all(out);
}

TEST(RunTest, ConfigErrorLeavesNoOutput) {
  const fs::path out = scratch("bad");
  json j = regret_config(out);
  j["alpha"] = -1;
  EXPECT_THROW(run_experiment(ExperimentConfig::from_json(j)), ConfigError);
  EXPECT_FALSE(fs::exists(out));
}

TEST(RunTest, ZeroNoiseMadCurveIsTight) {
  const fs::path out = scratch("mad0");
  json j = {{"experiment", "mad_curve"},
            {"seed", 3},
            {"out_dir", out.string()},
            {"zero_noise", true},
            {"require_privacy", false},
            {"grid", {4096, 8192}},
            {"design", {{"kind", "mad_thm2"}}},
            {"estimators", {"ridge", "ip_ridge"}}};
  const RunResult r = run_experiment(ExperimentConfig::from_json(j));
  const json& res = r.summary.at("results");
  // Noise-free perturbation reduces both to ridge on the same data.
  EXPECT_EQ(res.at("ridge").at("points")[0].at("mean"), res.at("ip_ridge").at("points")[0].at("mean"));
  EXPECT_TRUE(fs::exists(out / "points.csv"));
  fs::remove_all(out);
}

TEST(SelftestTest, AllChecksPassAndReportZ) {
  bool ok = false;
  const json s = mechanism_selftest(20000, 1, &ok);
  EXPECT_TRUE(ok) << s.dump(2);
  int with_z = 0;
  for (const json& c : s.at("checks")) {
    if (c.contains("z_mean")) ++with_z;
  }
  EXPECT_GE(with_z, 3 + 3 + 6);
}

TEST(ReportTest, MergesSummaries) {
  const json a = {{"experiment", "mad_curve"},
                  {"config_hash", "abc"},
                  {"results", {{"lplr", {{"fit", {{"slope", -0.5}}}}}}},
                  {"gates", {{"mad_rate", true}}}};
  const json b = {{"experiment", "regret_curve"},
                  {"config_hash", "def"},
                  {"results", json::object()},
                  {"gates", {{"regret_separation", false}}}};
  const std::vector<json> both = {a, b};
  const std::string t = report_table(both);
  EXPECT_NE(t.find("lplr.slope"), std::string::npos);
  EXPECT_NE(t.find("gate.mad_rate"), std::string::npos);
  EXPECT_NE(t.find("FAIL"), std::string::npos);
}

}  // namespace
}  // namespace ldpcb
