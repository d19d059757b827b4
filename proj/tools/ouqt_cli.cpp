// Copyright 2026 The ouqt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ouqt/cli.hpp"

namespace {

std::optional<ouqt::ExperimentConfig> load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    std::cerr << "cannot read config " << path << '\n';
    return std::nullopt;
  }
  std::ostringstream text;
  text << f.rdbuf();
  ouqt::ParseResult res = ouqt::parse_config(text.str());
  for (const auto& e : res.errors) std::cerr << path << ": " << e << '\n';
  return std::move(res.config);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo simulation of quantum trajectories driven by Ornstein-Uhlenbeck noise"};
  app.set_version_flag("--version", ouqt::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::optional<std::string> out_dir;
  auto common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", config_path, "experiment description (JSON)");
    if (config_required) c->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed, overrides run.master_seed");
    sub->add_option("--threads", threads, "worker threads (0 = hardware concurrency); never changes results");
    sub->add_option("--out", out_dir, "output directory, overrides output.directory");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "run an ensemble and write series.csv and summary.json");
  common(simulate, true);
  CLI::App* verify = app.add_subcommand("verify", "run the verification suites and write verify.json");
  common(verify, true);

  CLI::App* covariance = app.add_subcommand("covariance", "empirical against analytic OU covariance, covariance.csv");
  common(covariance, false);
  std::optional<double> gamma, horizon, dt;
  std::optional<std::size_t> n_paths, points;
  covariance->add_option("--gamma", gamma, "OU rate");
  covariance->add_option("--horizon", horizon, "final time T");
  covariance->add_option("--dt", dt, "time step");
  covariance->add_option("--n-paths", n_paths, "number of sample paths");
  covariance->add_option("--points", points, "grid times per axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ouqt::kExitOk : ouqt::kExitValidation;
  }

  ouqt::CommandOptions opts{seed, threads, out_dir};
  try {
    if (covariance->parsed()) {
      double g = 1.0, T = 1.0, step = 1e-3;
      std::size_t n = 100000, p = 5;
      std::uint64_t s = 1;
      std::string dir = "ouqt_out";
      if (!config_path.empty()) {
        auto cfg = load_config(config_path);
        if (!cfg) return ouqt::kExitValidation;
        g = cfg->model.gamma;
        T = cfg->grid.T;
        step = cfg->grid.dt;
        n = cfg->check.covariance_n_paths;
        p = cfg->check.covariance_points;
        s = cfg->run.master_seed;
        dir = cfg->output.directory;
      }
      return ouqt::cmd_covariance(gamma.value_or(g), horizon.value_or(T), dt.value_or(step), n_paths.value_or(n),
                                  seed.value_or(s), points.value_or(p), threads, out_dir.value_or(dir), std::cerr);
    }
    auto cfg = load_config(config_path);
    if (!cfg) return ouqt::kExitValidation;
    if (simulate->parsed()) return ouqt::cmd_simulate(*cfg, opts, std::cerr);
    return ouqt::cmd_verify(*cfg, opts, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ouqt::kExitRuntime;
  }
}
