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

#include "ldpcb/environments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ldpcb {

namespace {

constexpr double kNormSlack = 1e-12;

void check_feature(const Vec& phi) {
  if (phi.norm() > 1.0 + kNormSlack) throw std::invalid_argument("feature norm exceeds 1");
}

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec vec_from_json(const nlohmann::json& j) {
  const auto xs = j.get<std::vector<double>>();
  if (xs.empty() || xs.size() > static_cast<std::size_t>(kMaxDim)) {
    throw std::invalid_argument("vector dimension out of range");
  }
  Vec v(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) v[static_cast<Eigen::Index>(i)] = xs[i];
  return v;
}

nlohmann::json vec_to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

NoiseModel noise_from_json(const nlohmann::json& spec) {
  NoiseModel m;
  if (!spec.contains("noise")) return m;
  const nlohmann::json& j = spec.at("noise");
  if (j.is_string()) {
    m.kind = parse_reward_noise(j.get<std::string>());
  } else {
    m.kind = parse_reward_noise(j.at("kind").get<std::string>());
    m.width = j.value("width", 0.0);
  }
  return m;
}

std::vector<double> cumulative(const std::vector<double>& probs) {
  std::vector<double> cdf(probs.size());
  std::partial_sum(probs.begin(), probs.end(), cdf.begin());
  return cdf;
}

std::size_t draw(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform() * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

void check_probs(const std::vector<double>& probs, std::size_t n) {
  if (probs.size() != n) throw std::invalid_argument("probability vector has wrong length");
  double total = 0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("probabilities must sum to 1");
}

}  // namespace

// ---------------------------------------------------------------------------

void DiscreteDesign::validate() const {
  if (points.empty()) throw std::invalid_argument("empty design");
  check_probs(probs, points.size());
  for (const Vec& p : points) {
    if (p.size() != points.front().size()) throw std::invalid_argument("mixed dimensions");
    check_feature(p);
  }
}

std::size_t DiscreteDesign::sample_index(Rng& rng) const {
  // Linear scan; designs here have a handful of atoms.
  const double u = rng.uniform();
  double acc = 0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

Mat DiscreteDesign::second_moment() const {
  const Eigen::Index d = points.front().size();
  Mat m = Mat::Zero(d, d);
  for (std::size_t i = 0; i < points.size(); ++i) {
    m += probs[i] * points[i] * points[i].transpose();
  }
  return m;
}

RewardNoise parse_reward_noise(const std::string& s) {
  if (s == "none") return RewardNoise::kNone;
  if (s == "bernoulli") return RewardNoise::kBernoulli;
  if (s == "uniform") return RewardNoise::kUniform;
  throw std::invalid_argument("unknown reward noise: " + s);
}

std::string to_string(RewardNoise kind) {
  switch (kind) {
    case RewardNoise::kNone:
      return "none";
    case RewardNoise::kBernoulli:
      return "bernoulli";
    case RewardNoise::kUniform:
      return "uniform";
  }
  return "?";
}

// ---------------------------------------------------------------------------

LinearEnv::LinearEnv(Vec theta, std::vector<std::vector<Vec>> contexts, std::vector<double> probs,
                     NoiseModel noise)
    : theta_(std::move(theta)), contexts_(std::move(contexts)), probs_(std::move(probs)),
      noise_(noise) {
  if (theta_.size() < 1 || theta_.size() > kMaxDim) throw std::invalid_argument("bad dimension");
  if (theta_.norm() > 1.0 + kNormSlack) throw std::invalid_argument("theta norm exceeds 1");
  if (contexts_.empty() || contexts_.front().empty()) {
    throw std::invalid_argument("need at least one context and one action");
  }
  for (const auto& ctx : contexts_) {
    if (ctx.size() != contexts_.front().size()) throw std::invalid_argument("ragged action sets");
    for (const Vec& phi : ctx) {
      if (phi.size() != theta_.size()) throw std::invalid_argument("feature dimension mismatch");
      check_feature(phi);
    }
  }
  if (probs_.empty()) probs_.assign(contexts_.size(), 1.0 / static_cast<double>(contexts_.size()));
  check_probs(probs_, contexts_.size());
  if (noise_.kind == RewardNoise::kUniform && !(noise_.width >= 0.0 && noise_.width <= 1.0)) {
    throw std::invalid_argument("uniform noise width must be in [0, 1]");
  }
  cdf_ = cumulative(probs_);
}

Period LinearEnv::period(std::size_t context) const {
  Period p;
  p.context = context;
  p.features = contexts_[context];
  p.optimal_value = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < p.features.size(); ++a) {
    const double v = mean(p.features[a]);
    if (v > p.optimal_value) {
      p.optimal_value = v;
      p.optimal_action = static_cast<int>(a);
    }
  }
  return p;
}

Period LinearEnv::sample_period(Rng& rng) const { return period(draw(cdf_, rng)); }

double LinearEnv::realize_reward(const Vec& phi, Rng& rng) const {
  const double mu = mean(phi);
  double y = mu;
  switch (noise_.kind) {
    case RewardNoise::kNone:
      break;
    case RewardNoise::kBernoulli:
      y = rng.bernoulli(0.5 * (1.0 + std::clamp(mu, -1.0, 1.0))) ? 1.0 : -1.0;
      break;
    case RewardNoise::kUniform:
      y = mu + noise_.width * (2.0 * rng.uniform() - 1.0);
      break;
  }
  if (y > 1.0 || y < -1.0) {
    ++clamps_;
    y = std::clamp(y, -1.0, 1.0);
  }
  return y;
}

DiscreteDesign LinearEnv::action_design(int action) const {
  DiscreteDesign out;
  for (const auto& ctx : contexts_) out.points.push_back(ctx[static_cast<std::size_t>(action)]);
  out.probs = probs_;
  return out;
}

nlohmann::json LinearEnv::to_json() const {
  nlohmann::json ctx = nlohmann::json::array();
  for (const auto& c : contexts_) {
    nlohmann::json row = nlohmann::json::array();
    for (const Vec& phi : c) row.push_back(vec_to_json(phi));
    ctx.push_back(row);
  }
  return {{"kind", "explicit"},
          {"theta", vec_to_json(theta_)},
          {"contexts", ctx},
          {"probs", probs_},
          {"noise", {{"kind", to_string(noise_.kind)}, {"width", noise_.width}}}};
}

LinearEnv random_grid_env(int d, int actions, int contexts, std::uint64_t seed, NoiseModel noise) {
  if (d < 1 || d > kMaxDim || actions < 1 || contexts < 1) {
    throw std::invalid_argument("bad grid environment shape");
  }
  Rng rng(derive_key(seed, {channel(Channel::kData)}));
  auto direction = [&] {
    Vec v(d);
    do {
      for (int i = 0; i < d; ++i) v[i] = rng.gaussian();
    } while (v.norm() == 0.0);
    return Vec(v / v.norm());
  };
  std::vector<std::vector<Vec>> grid(static_cast<std::size_t>(contexts));
  for (auto& ctx : grid) {
    for (int a = 0; a < actions; ++a) {
      const double r = 0.1 + 0.9 * std::pow(rng.uniform(), 1.0 / d);
      ctx.push_back(direction() * r);
    }
  }
  return LinearEnv(direction() * 0.9, std::move(grid), {}, noise);
}

LinearEnv make_env(const nlohmann::json& spec, std::uint64_t seed) {
  const std::string kind = spec.value("kind", "grid");
  const NoiseModel noise = noise_from_json(spec);
  if (kind == "grid") {
    const int d = spec.value("d", 2);
    const std::uint64_t theta_seed = spec.value("theta_seed", seed);
    LinearEnv env = random_grid_env(d, spec.value("actions", 2), spec.value("contexts", 8),
                                    theta_seed, noise);
    if (!spec.contains("theta")) return env;
    std::vector<std::vector<Vec>> grid;
    for (std::size_t i = 0; i < env.context_count(); ++i) {
      grid.emplace_back(env.features(i).begin(), env.features(i).end());
    }
    return LinearEnv(vec_from_json(spec.at("theta")), std::move(grid), {}, noise);
  }
  if (kind == "case1" || kind == "case2") {
    const Vec theta = spec.contains("theta") ? vec_from_json(spec.at("theta")) : vec2(0.5, 0.5);
    return hard_bandit_env(parse_hard_kind(kind), spec.at("horizon").get<double>(), theta, noise);
  }
  if (kind == "explicit") {
    std::vector<std::vector<Vec>> grid;
    for (const auto& row : spec.at("contexts")) {
      std::vector<Vec> ctx;
      for (const auto& phi : row) ctx.push_back(vec_from_json(phi));
      grid.push_back(std::move(ctx));
    }
    return LinearEnv(vec_from_json(spec.at("theta")), std::move(grid),
                     spec.value("probs", std::vector<double>{}), noise);
  }
  throw std::invalid_argument("unknown environment kind: " + kind);
}

// ---------------------------------------------------------------------------

HardKind parse_hard_kind(const std::string& s) {
  if (s == "mse_thm1") return HardKind::kMseThm1;
  if (s == "mad_thm2") return HardKind::kMadThm2;
  if (s == "case1") return HardKind::kCase1;
  if (s == "case2") return HardKind::kCase2;
  throw std::invalid_argument("unknown hard design: " + s);
}

std::string to_string(HardKind kind) {
  switch (kind) {
    case HardKind::kMseThm1:
      return "mse_thm1";
    case HardKind::kMadThm2:
      return "mad_thm2";
    case HardKind::kCase1:
      return "case1";
    case HardKind::kCase2:
      return "case2";
  }
  return "?";
}

HardDesign HardDesign::make(HardKind kind, double n, double alpha) {
  return make(kind, n, alpha, 1.0 / std::sqrt(n));
}

HardDesign HardDesign::make(HardKind kind, double n, double alpha, double delta) {
  if (!(n >= 1.0)) throw std::invalid_argument("n must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must be in [0, 1]");
  HardDesign h;
  h.kind = kind;
  h.n = n;
  h.alpha = alpha;
  h.delta = delta;
  switch (kind) {
    case HardKind::kMseThm1:
      h.c = 1.0 / (4.0 * std::sqrt(2.0) * std::expm1(alpha));
      if (h.c / std::sqrt(n) > 1.0) throw std::invalid_argument("n too small for this alpha");
      break;
    case HardKind::kMadThm2:
      h.c = 0.07;
      break;
    case HardKind::kCase1:
    case HardKind::kCase2:
      h.c = delta;
      break;
  }
  return h;
}

DiscreteDesign HardDesign::design() const {
  DiscreteDesign out;
  switch (kind) {
    case HardKind::kMseThm1: {
      const double p = c / std::sqrt(n);
      out.points = {vec2(1, 0), vec2(0, 1)};
      out.probs = {1.0 - p, p};
      break;
    }
    case HardKind::kMadThm2: {
      const double s = c * std::cbrt(1.0 / n);
      out.points = {vec2(0.5, s), vec2(0.5, -s)};
      out.probs = {0.5, 0.5};
      break;
    }
    case HardKind::kCase1:
      out.points = {vec2(1, 0), vec2(0, 1)};
      out.probs = {1.0 - delta, delta};
      break;
    case HardKind::kCase2: {
      // Scaled into the unit ball.
      const double norm = std::sqrt(1.0 + delta);
      out.points = {vec2(1, std::sqrt(delta)) / norm, vec2(1, -std::sqrt(delta)) / norm};
      out.probs = {0.5, 0.5};
      break;
    }
  }
  return out;
}

std::pair<Vec, Vec> HardDesign::hypotheses() const {
  switch (kind) {
    case HardKind::kMseThm1:
    case HardKind::kCase1:
      return {vec2(0, 0), vec2(0, 1)};
    case HardKind::kMadThm2:
    case HardKind::kCase2:
      return {vec2(0.5, 0), vec2(0.5, 0.5)};
  }
  return {};
}

std::vector<Sample> hard_design_stream(const HardDesign& design, std::size_t count,
                                       const Vec& theta, Rng& rng) {
  if (theta.size() != 2) throw std::invalid_argument("hard designs are two-dimensional");
  return design_stream(design.design(), count, theta, rng);
}

std::vector<Sample> design_stream(const DiscreteDesign& law, std::size_t count, const Vec& theta,
                                  Rng& rng) {
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    s.phi = law.sample(rng);
    s.y = s.phi.dot(theta);
    out.push_back(std::move(s));
  }
  return out;
}

LinearEnv hard_bandit_env(HardKind kind, double horizon, const Vec& theta, NoiseModel noise) {
  if (kind != HardKind::kCase1 && kind != HardKind::kCase2) {
    throw std::invalid_argument("bandit environments exist for case1 and case2 only");
  }
  const DiscreteDesign law = HardDesign::make(kind, horizon, 1.0).design();
  std::vector<std::vector<Vec>> grid;
  for (const Vec& v : law.points) grid.push_back({v, vec2(v[0], -v[1])});
  return LinearEnv(theta, std::move(grid), law.probs, noise);
}

}  // namespace ldpcb
