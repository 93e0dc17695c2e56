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

// Command-line front end: run, selftest, report.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "ldpcb/runner.hpp"

namespace {

using ldpcb::ConfigError;
using ldpcb::ExperimentConfig;
using nlohmann::json;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kGateFailure = 2;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
  bool zero_noise = false;

  void apply(ExperimentConfig& c) const {
    if (seed) c.seed = *seed;
    if (threads) c.threads = *threads;
    if (out_dir) c.out_dir = *out_dir;
    if (zero_noise) c.zero_noise = true;
  }
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Base seed");
  cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::Range(1, 1024));
  cmd->add_option("--out-dir", o.out_dir, "Output directory");
  cmd->add_flag("--zero-noise", o.zero_noise,
                "Disable all privacy noise (refused when the config requires privacy)");
}

void print_gates(const ldpcb::RunResult& r) {
  for (const auto& [name, ok] : r.summary.at("gates").items()) {
    std::printf("  %-28s %s\n", name.c_str(), ok.get<bool>() ? "pass" : "FAIL");
  }
}

int cmd_run(const std::string& path, const Overrides& o) {
  ExperimentConfig c = ldpcb::load_config(path);
  o.apply(c);
  c.validate();
  const ldpcb::RunResult r = ldpcb::run_experiment(c);
  std::printf("%s  hash %s  wrote %zu files to %s\n", ldpcb::to_string(c.kind).c_str(),
              c.hash().c_str(), r.files.size(), c.out_dir.c_str());
  print_gates(r);
  return kOk;
}

int cmd_selftest(const Overrides& o, std::int64_t samples) {
  ExperimentConfig c;
  c.kind = ldpcb::ExperimentKind::kSelftest;
  c.out_dir = "selftest_out";
  c.selftest_samples = samples;
  o.apply(c);
  if (c.zero_noise) throw ConfigError("--zero-noise has no meaning for selftest");
  const ldpcb::RunResult r = ldpcb::run_experiment(c);
  for (const json& check : r.summary.at("results").at("checks")) {
    const std::string name = check.at("name");
    if (check.contains("z_mean")) {
      std::printf("  %-28s z_mean %+7.3f  z_var %+7.3f  %s\n", name.c_str(),
                  check.at("z_mean").get<double>(), check.at("z_var").get<double>(),
                  check.at("pass").get<bool>() ? "pass" : "FAIL");
    } else {
      std::printf("  %-28s %s\n", name.c_str(), check.at("pass").get<bool>() ? "pass" : "FAIL");
    }
  }
  std::printf("selftest %s\n", r.gates_ok ? "passed" : "FAILED");
  return r.gates_ok ? kOk : kGateFailure;
}

int cmd_report(const std::vector<std::string>& paths) {
  std::vector<json> summaries;
  for (const std::string& p : paths) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open " + p);
    try {
      summaries.push_back(json::parse(in));
    } catch (const json::exception& e) {
      throw ConfigError(p + ": " + e.what());
    }
  }
  std::cout << ldpcb::report_table(summaries);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locally differentially private contextual bandits"};
  app.require_subcommand(1);

  Overrides run_o;
  std::string config_path;
  CLI::App* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run->add_option("config", config_path, "Config file")->required();
  add_overrides(run, run_o);

  Overrides self_o;
  std::int64_t samples = 100000;
  CLI::App* self = app.add_subcommand("selftest", "Mechanism moment, certificate and kernel checks");
  add_overrides(self, self_o);
  self->add_option("--samples", samples, "Draws per moment check")->check(CLI::Range(1000, 100000000));

  std::vector<std::string> summaries;
  CLI::App* report = app.add_subcommand("report", "Merge summary.json files into one table");
  report->add_option("summaries", summaries, "summary.json files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(config_path, run_o);
    if (*self) return cmd_selftest(self_o, samples);
    if (*report) return cmd_report(summaries);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  }
  return kOk;
}
