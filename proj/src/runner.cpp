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

#include <algorithm>
#include <array>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace ldpcb {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Names

ExperimentKind parse_experiment_kind(const std::string& s) {
  if (s == "regret_curve") return ExperimentKind::kRegretCurve;
  if (s == "mad_curve") return ExperimentKind::kMadCurve;
  if (s == "mse_lower_bound") return ExperimentKind::kMseLowerBound;
  if (s == "coverage_audit") return ExperimentKind::kCoverageAudit;
  if (s == "mechanism_selftest") return ExperimentKind::kSelftest;
  throw ConfigError("unknown experiment: " + s);
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kRegretCurve:
      return "regret_curve";
    case ExperimentKind::kMadCurve:
      return "mad_curve";
    case ExperimentKind::kMseLowerBound:
      return "mse_lower_bound";
    case ExperimentKind::kCoverageAudit:
      return "coverage_audit";
    case ExperimentKind::kSelftest:
      return "mechanism_selftest";
  }
  return "?";
}

PolicyKind parse_policy_kind(const std::string& s) {
  if (s == "lplr_elimination") return PolicyKind::kLplrElimination;
  if (s == "suffstat_ucb") return PolicyKind::kSuffstatUcb;
  if (s == "nonprivate_ridge_elim") return PolicyKind::kNonprivateRidgeElim;
  throw ConfigError("unknown policy: " + s);
}

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kLplrElimination:
      return "lplr_elimination";
    case PolicyKind::kSuffstatUcb:
      return "suffstat_ucb";
    case PolicyKind::kNonprivateRidgeElim:
      return "nonprivate_ridge_elim";
  }
  return "?";
}

EstimatorKind parse_estimator_kind(const std::string& s) {
  if (s == "lplr") return EstimatorKind::kLplr;
  if (s == "ip_ridge") return EstimatorKind::kIpRidge;
  if (s == "ip_bias_corrected") return EstimatorKind::kIpBiasCorrected;
  if (s == "suffstat") return EstimatorKind::kSuffstat;
  if (s == "ridge") return EstimatorKind::kRidge;
  throw ConfigError("unknown estimator: " + s);
}

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kLplr:
      return "lplr";
    case EstimatorKind::kIpRidge:
      return "ip_ridge";
    case EstimatorKind::kIpBiasCorrected:
      return "ip_bias_corrected";
    case EstimatorKind::kSuffstat:
      return "suffstat";
    case EstimatorKind::kRidge:
      return "ridge";
  }
  return "?";
}

bool is_private(EstimatorKind kind) { return kind != EstimatorKind::kRidge; }

// ---------------------------------------------------------------------------
// Config

namespace {

const std::vector<std::string> kTopKeys = {
    "experiment", "seed",        "replications",  "threads",          "out_dir",
    "zero_noise", "require_privacy", "paper_faithful", "alpha",        "beta",
    "delta",      "kappas",      "grid",          "env",              "design",
    "policies",   "estimators",  "ridge_lambda",  "mad_draws",        "truth_draws",
    "policy_horizon", "oracle_horizon", "trace_stride", "selftest_samples"};

const std::vector<std::string> kPolicyKeys = {"kind", "n0", "lambda", "bonus", "shift",
                                              "inject_exact"};

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ConfigError("unknown key '" + k + "' in " + where);
    }
  }
}

PolicySpec policy_from_json(const json& j) {
  PolicySpec p;
  if (j.is_string()) {
    p.kind = parse_policy_kind(j.get<std::string>());
    return p;
  }
  check_keys(j, kPolicyKeys, "policy");
  p.kind = parse_policy_kind(j.at("kind").get<std::string>());
  p.n0 = j.value("n0", p.n0);
  p.lambda_reg = j.value("lambda", p.lambda_reg);
  p.bonus = j.value("bonus", p.bonus);
  p.shift = j.value("shift", p.shift);
  p.inject_exact = j.value("inject_exact", p.inject_exact);
  return p;
}

json policy_to_json(const PolicySpec& p) {
  return {{"kind", to_string(p.kind)}, {"n0", p.n0},       {"lambda", p.lambda_reg},
          {"bonus", p.bonus},          {"shift", p.shift}, {"inject_exact", p.inject_exact}};
}

std::string fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  try {
    check_keys(j, kTopKeys, "config");
    ExperimentConfig c;
    c.kind = parse_experiment_kind(j.at("experiment").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.replications = j.value("replications", c.replications);
    c.threads = j.value("threads", c.threads);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.zero_noise = j.value("zero_noise", c.zero_noise);
    c.require_privacy = j.value("require_privacy", c.require_privacy);
    c.paper_faithful = j.value("paper_faithful", c.paper_faithful);
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.delta = j.value("delta", c.delta);
    if (j.contains("kappas")) {
      const json& k = j.at("kappas");
      check_keys(k, {"kappa1", "kappa1p", "kappa2", "kappa3"}, "kappas");
      c.kappas.kappa1 = k.value("kappa1", c.kappas.kappa1);
      c.kappas.kappa1p = k.value("kappa1p", c.kappas.kappa1p);
      c.kappas.kappa2 = k.value("kappa2", c.kappas.kappa2);
      c.kappas.kappa3 = k.value("kappa3", c.kappas.kappa3);
    }
    c.grid = j.value("grid", c.grid);
    c.env = j.value("env", json());
    c.design = j.value("design", json());
    if (j.contains("policies")) {
      for (const json& p : j.at("policies")) c.policies.push_back(policy_from_json(p));
    }
    if (j.contains("estimators")) {
      for (const json& e : j.at("estimators")) {
        c.estimators.push_back(parse_estimator_kind(e.get<std::string>()));
      }
    }
    c.ridge_lambda = j.value("ridge_lambda", c.ridge_lambda);
    c.mad_draws = j.value("mad_draws", c.mad_draws);
    c.truth_draws = j.value("truth_draws", c.truth_draws);
    c.policy_horizon = j.value("policy_horizon", c.policy_horizon);
    c.oracle_horizon = j.value("oracle_horizon", c.oracle_horizon);
    c.trace_stride = j.value("trace_stride", c.trace_stride);
    c.selftest_samples = j.value("selftest_samples", c.selftest_samples);
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

json ExperimentConfig::to_json() const {
  json pol = json::array();
  for (const PolicySpec& p : policies) pol.push_back(policy_to_json(p));
  json est = json::array();
  for (EstimatorKind e : estimators) est.push_back(to_string(e));
  // threads and out_dir do not change results and are left out.
  return {{"experiment", to_string(kind)},
          {"seed", seed},
          {"replications", replications},
          {"zero_noise", zero_noise},
          {"require_privacy", require_privacy},
          {"paper_faithful", paper_faithful},
          {"alpha", alpha},
          {"beta", beta},
          {"delta", delta},
          {"kappas",
           {{"kappa1", kappas.kappa1},
            {"kappa1p", kappas.kappa1p},
            {"kappa2", kappas.kappa2},
            {"kappa3", kappas.kappa3}}},
          {"grid", grid},
          {"env", env},
          {"design", design},
          {"policies", pol},
          {"estimators", est},
          {"ridge_lambda", ridge_lambda},
          {"mad_draws", mad_draws},
          {"truth_draws", truth_draws},
          {"policy_horizon", policy_horizon},
          {"oracle_horizon", oracle_horizon},
          {"trace_stride", trace_stride},
          {"selftest_samples", selftest_samples}};
}

double ExperimentConfig::oracle_T() const {
  if (oracle_horizon > 0) return static_cast<double>(oracle_horizon);
  return grid.empty() ? 0.0 : static_cast<double>(grid.back());
}

std::string ExperimentConfig::hash() const { return fnv1a(to_json().dump()); }

namespace {

json env_for_horizon(const json& spec, double horizon) {
  json e = spec;
  const std::string kind = e.value("kind", "grid");
  if ((kind == "case1" || kind == "case2") && !e.contains("horizon")) e["horizon"] = horizon;
  return e;
}

// Feature law and parameter of one offline grid point. Hard designs depend on
// n; an explicit point list does not.
struct OfflineDesign {
  DiscreteDesign law;
  Vec theta;
};

Vec vec_of(const json& j) {
  const auto xs = j.get<std::vector<double>>();
  Vec v(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) v[static_cast<Eigen::Index>(i)] = xs[i];
  return v;
}

OfflineDesign design_for(const ExperimentConfig& c, double n) {
  const std::string kind = c.design.at("kind").get<std::string>();
  OfflineDesign out;
  if (kind == "points") {
    for (const json& p : c.design.at("points")) out.law.points.push_back(vec_of(p));
    if (out.law.points.empty()) throw ConfigError("design.points must not be empty");
    const std::size_t m = out.law.points.size();
    out.law.probs = c.design.contains("probs") ? c.design.at("probs").get<std::vector<double>>()
                                               : std::vector<double>(m, 1.0 / static_cast<double>(m));
    if (!c.design.contains("theta")) throw ConfigError("design.theta is required for points");
    out.theta = vec_of(c.design.at("theta"));
    for (const Vec& p : out.law.points) {
      if (p.size() != out.theta.size()) throw ConfigError("design dimension mismatch");
    }
  } else {
    const double a = c.design.value("alpha", c.alpha);
    const HardKind hk = parse_hard_kind(kind);
    const HardDesign h = c.design.contains("delta")
                             ? HardDesign::make(hk, n, a, c.design.at("delta").get<double>())
                             : HardDesign::make(hk, n, a);
    out.law = h.design();
    out.theta = c.design.contains("theta") ? vec_of(c.design.at("theta")) : h.hypotheses().second;
    if (out.theta.size() != 2) throw ConfigError("design theta must have 2 entries");
  }
  if (out.theta.norm() > 1.0) throw ConfigError("design theta must lie in the unit ball");
  out.law.validate();
  return out;
}

LayerParams layer_params_for(const ExperimentConfig& c, int d, double T) {
  return LayerParams::make(d, T, c.beta, c.alpha, c.delta, c.kappas, c.paper_faithful);
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (replications < 1) fail("replications must be >= 1");
  if (threads < 1 || threads > 1024) fail("threads must be in [1, 1024]");
  if (out_dir.empty()) fail("out_dir must not be empty");
  if (zero_noise && require_privacy) fail("zero-noise mode refused: the config requires privacy");
  if (!(alpha > 0.0 && alpha <= 1.0)) fail("alpha must be in (0, 1]");
  if (!(beta > 0.0 && beta < 1.0)) fail("beta must be in (0, 1)");
  if (!(delta > 0.0 && delta <= 1.0)) fail("delta must be in (0, 1]");
  if (!(kappas.kappa1 > 0 && kappas.kappa1p > 0 && kappas.kappa2 > 0 && kappas.kappa3 > 0)) {
    fail("kappas must be positive");
  }
  if (trace_stride < 1) fail("trace_stride must be >= 1");
  if (oracle_horizon < 0) fail("oracle_horizon must be >= 0");
  for (std::int64_t g : grid) {
    if (g < 1) fail("grid values must be positive");
  }
  if (!std::is_sorted(grid.begin(), grid.end()) ||
      std::adjacent_find(grid.begin(), grid.end()) != grid.end()) {
    fail("grid must be strictly increasing");
  }
  try {
    switch (kind) {
      case ExperimentKind::kSelftest:
        if (selftest_samples < 1000) fail("selftest_samples must be >= 1000");
        break;
      case ExperimentKind::kRegretCurve: {
        if (grid.empty()) fail("regret_curve needs a grid of horizons");
        if (policies.empty()) fail("regret_curve needs at least one policy");
        for (std::int64_t T : grid) {
          const LinearEnv e = make_env(env_for_horizon(this->env, static_cast<double>(T)), seed);
          for (const PolicySpec& p : policies) {
            if (p.kind == PolicyKind::kLplrElimination) {
              PolicyConfig pc;
              pc.d = e.d();
              pc.actions = e.actions();
              pc.schedule = {p.n0 > 0 ? p.n0 : 1, T};
              pc.beta = beta;
              pc.alpha = alpha;
              pc.delta = delta;
              pc.kappas = kappas;
              pc.paper_faithful = paper_faithful;
              pc.validate();
            } else if (!(p.lambda_reg > 0.0) || !(p.bonus >= 0.0) || !(p.shift >= 0.0)) {
              fail("policy constants must be positive");
            }
          }
        }
        break;
      }
      case ExperimentKind::kMadCurve:
      case ExperimentKind::kMseLowerBound: {
        if (grid.empty()) fail("curve experiments need a grid of sample counts");
        if (!design.is_object() || !design.contains("kind")) fail("design.kind is required");
        check_keys(design, {"kind", "alpha", "delta", "theta", "points", "probs"}, "design");
        if (estimators.empty()) fail("need at least one estimator");
        if (mad_draws < 10000) fail("mad_draws must be >= 10000");
        if (!(ridge_lambda > 0.0)) fail("ridge_lambda must be positive");
        int dim = 0;
        for (std::int64_t n : grid) dim = static_cast<int>(design_for(*this, static_cast<double>(n)).theta.size());
        layer_params_for(*this, dim, oracle_T()).validate();
        break;
      }
      case ExperimentKind::kCoverageAudit: {
        if (grid.empty()) fail("coverage_audit needs a grid of sample counts");
        if (truth_draws < 1000000) fail("truth_draws must be >= 1e6");
        const LinearEnv e = make_env(env, seed);
        layer_params_for(*this, e.d(), oracle_T()).validate();
        if (policy_horizon < 0) fail("policy_horizon must be >= 0");
        if (policy_horizon > 0) {
          layer_params_for(*this, e.d(), static_cast<double>(policy_horizon)).validate();
        }
        break;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const std::out_of_range& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  return ExperimentConfig::from_json(j);
}

// ---------------------------------------------------------------------------
// Workers

void parallel_for(std::size_t tasks, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), tasks);
  if (workers <= 1) {
    for (std::size_t i = 0; i < tasks; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < tasks; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          next = tasks;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Bandit runs

namespace {

std::unique_ptr<BanditPolicy> make_policy(const ExperimentConfig& c, const PolicySpec& spec,
                                          const LinearEnv& env, std::int64_t T,
                                          std::uint64_t key) {
  const std::int64_t n0 =
      spec.n0 > 0 ? spec.n0 : EpochSchedule::default_n0(env.d(), static_cast<double>(T), c.beta);
  switch (spec.kind) {
    case PolicyKind::kLplrElimination: {
      PolicyConfig pc;
      pc.d = env.d();
      pc.actions = env.actions();
      pc.schedule = {n0, T};
      pc.beta = c.beta;
      pc.alpha = c.alpha;
      pc.delta = c.delta;
      pc.kappas = c.kappas;
      pc.paper_faithful = c.paper_faithful;
      pc.zero_noise = c.zero_noise;
      auto p = std::make_unique<EliminationPolicy>(pc, key);
      if (spec.inject_exact) {
        p->set_table_override([&env](int, int, const Vec& phi) {
          return Evaluation{std::clamp(env.mean(phi), -1.0, 1.0), 0.0, 0};
        });
      }
      return p;
    }
    case PolicyKind::kSuffstatUcb: {
      UcbConfig uc;
      uc.d = env.d();
      uc.actions = env.actions();
      uc.alpha = c.alpha;
      uc.zero_noise = c.zero_noise;
      uc.lambda_reg = spec.lambda_reg;
      uc.shift = spec.shift;
      uc.bonus = spec.bonus;
      return std::make_unique<SuffstatUcbPolicy>(uc, key);
    }
    case PolicyKind::kNonprivateRidgeElim: {
      RidgeElimConfig rc;
      rc.d = env.d();
      rc.actions = env.actions();
      rc.schedule = {n0, T};
      rc.lambda_reg = spec.lambda_reg;
      rc.bonus = spec.bonus;
      return std::make_unique<RidgeEliminationPolicy>(rc);
    }
  }
  throw std::logic_error("unreachable");
}

bool contains(const std::vector<int>& xs, int x) {
  return std::find(xs.begin(), xs.end(), x) != xs.end();
}

// Every fitted table must cover every (context, action) of the grid.
bool tables_cover(const EliminationPolicy& p, const LinearEnv& env) {
  for (int tau = 2; tau <= p.tables(); ++tau) {
    for (int a = 0; a < env.actions(); ++a) {
      for (std::size_t x = 0; x < env.context_count(); ++x) {
        const Vec& phi = env.features(x)[static_cast<std::size_t>(a)];
        const Evaluation e = p.table(tau, a, phi);
        if (std::abs(e.f_hat - env.mean(phi)) > e.delta) return false;
      }
    }
  }
  return true;
}

}  // namespace

RegretTrace run_bandit(const ExperimentConfig& config, const PolicySpec& spec,
                       const LinearEnv& env, std::int64_t T, int replication, bool audit) {
  const std::uint64_t base = derive_key(config.seed, {static_cast<std::uint64_t>(replication),
                                                      static_cast<std::uint64_t>(T)});
  const std::uint64_t data_key = derive_key(base, {channel(Channel::kData)});
  const std::uint64_t policy_key = derive_key(base, {channel(Channel::kPolicy)});
  const std::uint64_t reward_key = derive_key(base, {channel(Channel::kReward)});
  std::unique_ptr<BanditPolicy> policy =
      make_policy(config, spec, env, T, derive_key(base, {channel(Channel::kMechanism)}));
  auto* elim = dynamic_cast<EliminationPolicy*>(policy.get());
  audit = audit && elim != nullptr;

  RegretTrace trace;
  double cum = 0.0;
  for (std::int64_t t = 1; t <= T; ++t) {
    const auto tt = static_cast<std::uint64_t>(t);
    Rng ctx_rng(data_key, tt);
    const Period per = env.sample_period(ctx_rng);
    Rng pol_rng(policy_key, tt);
    const Decision dec = policy->decide(per.features, pol_rng);
    const Vec& phi = per.features[static_cast<std::size_t>(dec.action)];
    cum += per.optimal_value - env.mean(phi);

    if (audit) {
      const ActiveSets& sets = elim->last_active();
      for (std::size_t l = 0; l < sets.levels.size(); ++l) {
        if (!contains(sets.levels[l], per.optimal_action)) ++trace.retention_violations;
        if (l > 0) {
          for (int a : sets.levels[l]) {
            if (!contains(sets.levels[l - 1], a)) ++trace.nesting_violations;
          }
        }
      }
      if (static_cast<int>(sets.last().size()) < env.actions()) ++trace.reduced_periods;
      double width = 0.0;
      for (int a : sets.last()) {
        width += elim->table(elim->epoch(), a, per.features[static_cast<std::size_t>(a)]).delta;
      }
      for (int a : sets.last()) {
        const double gap =
            per.optimal_value - env.mean(per.features[static_cast<std::size_t>(a)]);
        if (gap > 2.0 * width + 1e-12) ++trace.gap_violations;
      }
    }

    if (t % config.trace_stride == 0 || t == T) {
      trace.rows.push_back({t, cum, dec.active_size, dec.epoch});
    }
    Rng rew_rng(reward_key, tt);
    policy->record(per.features, dec.action, env.realize_reward(phi, rew_rng));
  }
  trace.final_regret = cum;
  if (elim != nullptr) trace.ci_valid = tables_cover(*elim, env);
  return trace;
}

// ---------------------------------------------------------------------------
// Output helpers

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Stats {
  double mean = 0;
  double std = 0;
};

Stats stats(const std::vector<double>& xs) {
  Stats s;
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

json slope_json(const std::vector<double>& xs, const std::vector<double>& ys) {
  try {
    const SlopeFit f = fit_loglog_slope(xs, ys);
    return {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}};
  } catch (const std::invalid_argument& e) {
    return {{"slope", nullptr}, {"error", e.what()}};
  }
}

std::optional<double> slope_of(const json& j) {
  if (j.contains("slope") && j.at("slope").is_number()) return j.at("slope").get<double>();
  return std::nullopt;
}

class Staging {
 public:
  explicit Staging(const ExperimentConfig& c)
      : out_(c.out_dir), dir_(fs::path(c.out_dir) / (".staging-" + c.hash())) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Staging() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }
  fs::path path(const std::string& rel) const {
    const fs::path p = dir_ / rel;
    fs::create_directories(p.parent_path());
    return p;
  }
  std::vector<fs::path> commit() {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir_)) {
      if (!entry.is_regular_file()) continue;
      const fs::path rel = fs::relative(entry.path(), dir_);
      const fs::path dst = out_ / rel;
      fs::create_directories(dst.parent_path());
      fs::rename(entry.path(), dst);
      files.push_back(dst);
    }
    std::sort(files.begin(), files.end());
    return files;
  }

 private:
  fs::path out_;
  fs::path dir_;
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

void write_trace(const fs::path& p, const RegretTrace& trace) {
  std::ostringstream os;
  os << "t,cum_regret,active_set_size,epoch\n";
  for (const TraceRow& r : trace.rows) {
    os << r.t << ',' << fmt(r.cum_regret) << ',' << r.active_set_size << ',' << r.epoch << '\n';
  }
  write_text(p, os.str());
}

std::string grid_tag(std::int64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%010" PRId64, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Experiments

json run_regret_curve(const ExperimentConfig& c, Staging& staging, json& gates_out) {
  struct Task {
    std::size_t policy;
    std::size_t grid;
    int rep;
  };
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < c.policies.size(); ++p) {
    for (std::size_t g = 0; g < c.grid.size(); ++g) {
      for (int r = 0; r < c.replications; ++r) tasks.push_back({p, g, r});
    }
  }
  std::vector<RegretTrace> traces(tasks.size());
  parallel_for(tasks.size(), c.threads, [&](std::size_t i) {
    const Task& task = tasks[i];
    const std::int64_t T = c.grid[task.grid];
    const LinearEnv env = make_env(env_for_horizon(c.env, static_cast<double>(T)), c.seed);
    const PolicySpec& spec = c.policies[task.policy];
    RegretTrace tr = run_bandit(c, spec, env, T, task.rep, false);
    write_trace(staging.path("traces/" + to_string(spec.kind) + (spec.inject_exact ? "_exact" : "") +
                             "_T" + grid_tag(T) + "_r" + std::to_string(task.rep) + ".csv"),
                tr);
    tr.rows.clear();
    tr.rows.shrink_to_fit();
    traces[i] = std::move(tr);
  });

  json results = json::object();
  std::map<PolicyKind, double> slopes;
  bool exact_zero = true;
  bool any_exact = false;
  for (std::size_t p = 0; p < c.policies.size(); ++p) {
    const PolicySpec& spec = c.policies[p];
    const std::string name = to_string(spec.kind) + (spec.inject_exact ? "_exact" : "");
    json points = json::array();
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t g = 0; g < c.grid.size(); ++g) {
      std::vector<double> finals;
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].policy == p && tasks[i].grid == g) finals.push_back(traces[i].final_regret);
      }
      const Stats s = stats(finals);
      points.push_back({{"T", c.grid[g]}, {"mean", s.mean}, {"std", s.std}, {"finals", finals}});
      xs.push_back(static_cast<double>(c.grid[g]));
      ys.push_back(s.mean);
      if (spec.inject_exact) {
        any_exact = true;
        exact_zero = exact_zero && std::all_of(finals.begin(), finals.end(),
                                               [](double f) { return f == 0.0; });
      }
    }
    json fit = c.grid.size() >= 4 ? slope_json(xs, ys) : json{{"slope", nullptr}};
    if (const auto s = slope_of(fit); s && !spec.inject_exact) slopes[spec.kind] = *s;
    results[name] = {{"points", points}, {"fit", fit}};
  }
  if (any_exact) gates_out["exact_tables_zero_regret"] = exact_zero;
  if (slopes.count(PolicyKind::kLplrElimination) && slopes.count(PolicyKind::kSuffstatUcb)) {
    gates_out["regret_separation"] = gates::regret_separation(
        slopes[PolicyKind::kLplrElimination], slopes[PolicyKind::kSuffstatUcb]);
  }
  return results;
}

struct EstimatorOutcome {
  double mad_delta = 0;  // E[delta(phi)] (LPLR only)
  double mad_true = 0;   // E|f_hat - f*|
  double mad_mc = 0;
  double mad_mc_se = 0;
  double mse = 0;        // E (f_hat - f*)^2
  bool covered = true;   // |f_hat - f*| <= delta on the support (LPLR only)
};

EstimatorOutcome evaluate_estimator(EstimatorKind kind, const ExperimentConfig& c,
                                    const OfflineDesign& design, std::span<const Sample> data,
                                    std::uint64_t key) {
  const DiscreteDesign& law = design.law;
  const Vec& theta = design.theta;
  const int d = static_cast<int>(theta.size());
  std::function<double(const Vec&)> f;
  std::function<double(const Vec&)> width;
  Vec theta_hat;
  std::optional<OracleEstimate> oracle;
  switch (kind) {
    case EstimatorKind::kLplr: {
      OracleConfig oc;
      oc.layer_params = layer_params_for(c, d, c.oracle_T());
      oc.n_per_layer = static_cast<std::int64_t>(data.size()) / (2 * d);
      oc.zero_noise = c.zero_noise;
      oracle = run_oracle(data.first(static_cast<std::size_t>(oc.total_samples())), oc, key);
      f = [&](const Vec& phi) { return oracle->f_hat(phi); };
      width = [&](const Vec& phi) { return oracle->delta(phi); };
      break;
    }
    case EstimatorKind::kIpRidge:
    case EstimatorKind::kIpBiasCorrected:
      theta_hat = input_perturb_fit(
          data, d, c.zero_noise ? std::numeric_limits<double>::infinity() : c.alpha, key,
          kind == EstimatorKind::kIpRidge ? IpEstimator::kRidge : IpEstimator::kBiasCorrected,
          c.ridge_lambda);
      break;
    case EstimatorKind::kSuffstat:
      theta_hat = suffstat_fit(data, d, c.alpha, key, c.ridge_lambda, c.zero_noise);
      break;
    case EstimatorKind::kRidge:
      theta_hat = ridge_fit(data, d, c.ridge_lambda);
      break;
  }
  if (!f) f = [&](const Vec& phi) { return phi.dot(theta_hat); };
  EstimatorOutcome out;
  for (std::size_t i = 0; i < law.points.size(); ++i) {
    const Vec& phi = law.points[i];
    const double err = f(phi) - phi.dot(theta);
    out.mad_true += law.probs[i] * std::abs(err);
    out.mse += law.probs[i] * err * err;
    if (width) {
      const double w = width(phi);
      out.mad_delta += law.probs[i] * w;
      out.covered = out.covered && std::abs(err) <= w;
    }
  }
  Rng rng(derive_key(key, {channel(Channel::kAudit)}));
  const MadEstimate mc = estimate_mad(f, theta, law, c.mad_draws, rng);
  out.mad_mc = mc.mean;
  out.mad_mc_se = mc.std_error;
  return out;
}

json run_estimation_curve(const ExperimentConfig& c, Staging& staging, json& gates_out) {
  const bool mse_mode = c.kind == ExperimentKind::kMseLowerBound;
  struct Task {
    std::size_t grid;
    int rep;
  };
  std::vector<Task> tasks;
  for (std::size_t g = 0; g < c.grid.size(); ++g) {
    for (int r = 0; r < c.replications; ++r) tasks.push_back({g, r});
  }
  std::vector<std::vector<EstimatorOutcome>> outcomes(tasks.size());
  parallel_for(tasks.size(), c.threads, [&](std::size_t i) {
    const std::int64_t n = c.grid[tasks[i].grid];
    const OfflineDesign design = design_for(c, static_cast<double>(n));
    const std::uint64_t base =
        derive_key(c.seed, {static_cast<std::uint64_t>(tasks[i].rep), static_cast<std::uint64_t>(n)});
    Rng data_rng(derive_key(base, {channel(Channel::kData)}));
    const std::vector<Sample> data =
        design_stream(design.law, static_cast<std::size_t>(n), design.theta, data_rng);
    for (std::size_t e = 0; e < c.estimators.size(); ++e) {
      outcomes[i].push_back(evaluate_estimator(c.estimators[e], c, design, data,
                                               derive_key(base, {channel(Channel::kMechanism), e})));
    }
  });

  std::ostringstream csv;
  csv << "estimator,n,rep,mad_delta,mad_true,mad_mc,mad_mc_se,mse\n";
  json results = json::object();
  std::map<EstimatorKind, double> slopes;
  for (std::size_t e = 0; e < c.estimators.size(); ++e) {
    const EstimatorKind kind = c.estimators[e];
    json points = json::array();
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<double> ys_true;
    for (std::size_t g = 0; g < c.grid.size(); ++g) {
      std::vector<double> primary;
      std::vector<double> truth;
      std::vector<double> mc;
      int covered = 0;
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].grid != g) continue;
        const EstimatorOutcome& o = outcomes[i][e];
        csv << to_string(kind) << ',' << c.grid[g] << ',' << tasks[i].rep << ',' << fmt(o.mad_delta)
            << ',' << fmt(o.mad_true) << ',' << fmt(o.mad_mc) << ',' << fmt(o.mad_mc_se) << ','
            << fmt(o.mse) << '\n';
        if (mse_mode) {
          primary.push_back(o.mse);
        } else {
          primary.push_back(kind == EstimatorKind::kLplr ? o.mad_delta : o.mad_true);
        }
        truth.push_back(o.mad_true);
        mc.push_back(o.mad_mc);
        covered += o.covered;
      }
      const Stats s = stats(primary);
      const Stats st = stats(truth);
      const Stats sm = stats(mc);
      points.push_back({{"n", c.grid[g]},
                        {"mean", s.mean},
                        {"std", s.std},
                        {"mad_true_mean", st.mean},
                        {"mad_mc_mean", sm.mean}});
      if (kind == EstimatorKind::kLplr) {
        points.back()["coverage"] = static_cast<double>(covered) / static_cast<double>(primary.size());
      }
      xs.push_back(static_cast<double>(c.grid[g]));
      ys.push_back(s.mean);
      ys_true.push_back(st.mean);
    }
    json fit = c.grid.size() >= 4 ? slope_json(xs, ys) : json{{"slope", nullptr}};
    json fit_true = c.grid.size() >= 4 ? slope_json(xs, ys_true) : json{{"slope", nullptr}};
    if (const auto s = slope_of(fit)) slopes[kind] = *s;
    results[to_string(kind)] = {
        {"metric", mse_mode ? "mse" : (kind == EstimatorKind::kLplr ? "mad_delta" : "mad_true")},
        {"points", points},
        {"fit", fit},
        {"fit_mad_true", fit_true}};
  }
  write_text(staging.path("points.csv"), csv.str());

  if (mse_mode) {
    std::vector<double> priv;
    bool complete = true;
    for (EstimatorKind k : c.estimators) {
      if (!is_private(k)) continue;
      if (slopes.count(k)) {
        priv.push_back(slopes[k]);
      } else {
        complete = false;
      }
    }
    if (!priv.empty()) gates_out["mse_floor"] = complete && gates::mse_floor(priv);
  } else if (slopes.count(EstimatorKind::kLplr)) {
    const double lplr = slopes[EstimatorKind::kLplr];
    gates_out["mad_rate"] = gates::mad_rate(lplr);
    std::optional<double> best;
    for (EstimatorKind k : {EstimatorKind::kIpRidge, EstimatorKind::kIpBiasCorrected}) {
      if (slopes.count(k)) best = best ? std::min(*best, slopes[k]) : slopes[k];
    }
    if (best) {
      gates_out["ip_floor"] = gates::ip_floor(*best, lplr);
      results["best_ip_slope"] = *best;
    }
  }
  return results;
}

json run_coverage_audit(const ExperimentConfig& c, Staging& staging, json& gates_out) {
  const LinearEnv env = make_env(c.env, c.seed);
  const int A = env.actions();
  const int d = env.d();
  struct Task {
    std::size_t grid;
    int rep;
  };
  std::vector<Task> tasks;
  for (std::size_t g = 0; g < c.grid.size(); ++g) {
    for (int r = 0; r < c.replications; ++r) tasks.push_back({g, r});
  }
  struct OracleOutcome {
    double max_violation = 0;
    double mad = 0;
    std::vector<Lemma2Bin> lemma2;
  };
  std::vector<std::vector<OracleOutcome>> outcomes(tasks.size());

  parallel_for(tasks.size(), c.threads, [&](std::size_t i) {
    const std::int64_t n = c.grid[tasks[i].grid];
    const std::uint64_t base = derive_key(
        c.seed, {static_cast<std::uint64_t>(tasks[i].rep), static_cast<std::uint64_t>(n)});
    OracleConfig oc;
    oc.layer_params = layer_params_for(c, d, c.oracle_T());
    oc.n_per_layer = n / (2 * d);
    oc.zero_noise = c.zero_noise;
    for (int a = 0; a < A; ++a) {
      const std::uint64_t key = derive_key(base, {channel(Channel::kMechanism), static_cast<std::uint64_t>(a)});
      LplrOracle oracle(oc, key);
      // Epoch-one law: the action is drawn uniformly, so this oracle sees a
      // real sample with probability 1/A and the dummy otherwise.
      std::vector<StreamAtom> law;
      const double pa = 1.0 / A;
      for (std::size_t x = 0; x < env.context_count(); ++x) {
        const Vec& phi = env.features(x)[static_cast<std::size_t>(a)];
        const double px = env.probs()[x] * pa;
        const double mu = env.mean(phi);
        switch (env.noise().kind) {
          case RewardNoise::kNone:
            law.push_back({phi, mu, px, false});
            break;
          case RewardNoise::kBernoulli:
            law.push_back({phi, 1.0, px * 0.5 * (1 + mu), false});
            law.push_back({phi, -1.0, px * 0.5 * (1 - mu), false});
            break;
          case RewardNoise::kUniform:
            law.push_back({phi, mu + env.noise().width, 0.5 * px, false});
            law.push_back({phi, mu - env.noise().width, 0.5 * px, false});
            break;
        }
      }
      if (A > 1) law.push_back({Vec::Zero(d), 0.0, 1.0 - pa, true});
      OracleOutcome out;
      attach_lemma2_observer(oracle, law, c.truth_draws, key, &out.lemma2);

      Rng data_rng(derive_key(key, {channel(Channel::kData)}));
      while (!oracle.finalized()) {
        const Period per = env.sample_period(data_rng);
        if (data_rng.below(static_cast<std::uint64_t>(A)) == static_cast<std::uint64_t>(a)) {
          const Vec& phi = per.features[static_cast<std::size_t>(a)];
          oracle.feed(phi, env.realize_reward(phi, data_rng));
        } else {
          oracle.feed_dummy();
        }
      }
      if (tasks[i].rep == 0) {
        write_text(staging.path("oracles/n" + grid_tag(n) + "_a" + std::to_string(a) + ".json"),
                   oracle.dump().dump(1) + "\n");
      }
      const OracleEstimate est = oracle.estimate();
      for (std::size_t x = 0; x < env.context_count(); ++x) {
        const Vec& phi = env.features(x)[static_cast<std::size_t>(a)];
        const Evaluation e = est.evaluate(phi);
        out.max_violation = std::max(out.max_violation, std::abs(e.f_hat - env.mean(phi)) - e.delta);
        out.mad += env.probs()[x] * e.delta;
      }
      outcomes[i].push_back(std::move(out));
    }
  });

  std::ostringstream csv;
  csv << "n,rep,action,covered,max_violation,mad_delta\n";
  json results = json::object();
  json per_n = json::array();
  bool coverage_ok = true;
  bool lemma2_ok = true;
  for (std::size_t g = 0; g < c.grid.size(); ++g) {
    VerificationReport report;
    int covered = 0;
    int runs = 0;
    double mad = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].grid != g) continue;
      for (int a = 0; a < A; ++a) {
        const OracleOutcome& o = outcomes[i][static_cast<std::size_t>(a)];
        const bool ok = o.max_violation <= 0.0;
        csv << c.grid[g] << ',' << tasks[i].rep << ',' << a << ',' << (ok ? 1 : 0) << ','
            << fmt(std::max(0.0, o.max_violation)) << ',' << fmt(o.mad) << '\n';
        covered += ok;
        ++runs;
        mad += o.mad;
        report.runs.push_back(o.lemma2);
      }
    }
    report.coverage_rate = static_cast<double>(covered) / runs;
    report.mad = mad / runs;
    json rep = report.to_json();
    rep["n"] = c.grid[g];
    rep["lemma2_required"] = report.lemma2_required(c.delta);
    per_n.push_back(rep);
    coverage_ok = coverage_ok && gates::coverage(report.coverage_rate);
    lemma2_ok = lemma2_ok && report.lemma2_ok_runs() >= report.lemma2_required(c.delta);
  }
  write_text(staging.path("coverage.csv"), csv.str());
  results["oracle_audit"] = per_n;
  gates_out["coverage"] = coverage_ok;
  gates_out["lemma2"] = lemma2_ok;

  if (c.policy_horizon > 0) {
    PolicySpec spec;
    for (const PolicySpec& p : c.policies) {
      if (p.kind == PolicyKind::kLplrElimination) spec = p;
    }
    std::vector<RegretTrace> traces(static_cast<std::size_t>(c.replications));
    parallel_for(traces.size(), c.threads, [&](std::size_t r) {
      traces[r] = run_bandit(c, spec, env, c.policy_horizon, static_cast<int>(r), true);
      traces[r].rows.clear();
    });
    std::ostringstream pcsv;
    pcsv << "rep,ci_valid,retention_violations,nesting_violations,gap_violations,reduced_periods,"
            "final_regret\n";
    int valid = 0;
    std::int64_t retention = 0;
    std::int64_t nesting = 0;
    std::int64_t gap = 0;
    std::int64_t reduced = 0;
    for (std::size_t r = 0; r < traces.size(); ++r) {
      const RegretTrace& t = traces[r];
      pcsv << r << ',' << (t.ci_valid ? 1 : 0) << ',' << t.retention_violations << ','
           << t.nesting_violations << ',' << t.gap_violations << ',' << t.reduced_periods << ','
           << fmt(t.final_regret) << '\n';
      nesting += t.nesting_violations;
      if (!t.ci_valid) continue;
      ++valid;
      retention += t.retention_violations;
      gap += t.gap_violations;
      reduced += t.reduced_periods;
    }
    write_text(staging.path("policy_audit.csv"), pcsv.str());
    results["policy_audit"] = {{"replications", c.replications},
                               {"horizon", c.policy_horizon},
                               {"ci_valid_replications", valid},
                               {"retention_violations_on_valid", retention},
                               {"gap_violations_on_valid", gap},
                               {"reduced_periods_on_valid", reduced},
                               {"nesting_violations", nesting}};
    gates_out["elimination_invariants"] = valid > 0 && retention == 0 && nesting == 0;
  }
  return results;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  Staging staging(config);
  json gates = json::object();
  json results;
  switch (config.kind) {
    case ExperimentKind::kRegretCurve:
      results = run_regret_curve(config, staging, gates);
      break;
    case ExperimentKind::kMadCurve:
    case ExperimentKind::kMseLowerBound:
      results = run_estimation_curve(config, staging, gates);
      break;
    case ExperimentKind::kCoverageAudit:
      results = run_coverage_audit(config, staging, gates);
      break;
    case ExperimentKind::kSelftest: {
      bool ok = false;
      results = mechanism_selftest(config.selftest_samples, config.seed, &ok);
      gates["mechanism_selftest"] = ok;
      break;
    }
  }
  RunResult out;
  for (const auto& [k, v] : gates.items()) out.gates_ok = out.gates_ok && v.get<bool>();
  out.summary = {{"experiment", to_string(config.kind)},
                 {"config_hash", config.hash()},
                 {"config", config.to_json()},
                 {"results", results},
                 {"gates", gates},
                 {"gates_ok", out.gates_ok}};
  write_text(staging.path("summary.json"), out.summary.dump(2) + "\n");
  out.files = staging.commit();
  return out;
}

// ---------------------------------------------------------------------------

std::string report_table(std::span<const json> summaries) {
  std::vector<std::array<std::string, 4>> rows;
  rows.push_back({"experiment", "hash", "key", "value"});
  for (const json& s : summaries) {
    const std::string exp = s.value("experiment", "?");
    const std::string hash = s.value("config_hash", "?");
    const json& results = s.contains("results") ? s.at("results") : json::object();
    for (const auto& [name, r] : results.items()) {
      if (r.is_object() && r.contains("fit")) {
        const json& fit = r.at("fit");
        rows.push_back({exp, hash, name + ".slope",
                        fit.contains("slope") && fit.at("slope").is_number()
                            ? fmt(fit.at("slope").get<double>())
                            : std::string("n/a")});
      }
    }
    if (s.contains("gates")) {
      for (const auto& [g, v] : s.at("gates").items()) {
        rows.push_back({exp, hash, "gate." + g, v.get<bool>() ? "pass" : "FAIL"});
      }
    }
  }
  std::array<std::size_t, 4> width{};
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < 4; ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::ostringstream os;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < 4; ++i) {
      os << r[i];
      if (i < 3) os << std::string(width[i] - r[i].size() + 2, ' ');
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace ldpcb
