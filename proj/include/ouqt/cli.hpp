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

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ouqt/config.hpp"
#include "ouqt/ensemble.hpp"
#include "ouqt/model.hpp"
#include "ouqt/noise.hpp"
#include "ouqt/oracle.hpp"

namespace ouqt {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitRuntime = 2, kExitVerification = 3 };

struct CommandOptions {
  std::optional<std::uint64_t> seed;  // overrides run.master_seed
  unsigned threads = 0;               // scheduling only
  std::optional<std::string> out_dir;  // overrides output.directory
};

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::filesystem::path output_dir(const ExperimentConfig& c, const CommandOptions& o) {
  std::filesystem::path p = o.out_dir ? *o.out_dir : c.output.directory;
  std::filesystem::create_directories(p);
  return p;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
  if (!f) throw Error(Errc::aborted, "cannot write " + p.string());
}

// One row per output time: t, mean_weight, mean_weight_stderr, eta_re_i_j and
// eta_im_i_j for j >= i, then <name>_mean and <name>_stderr per observable.
inline std::string series_csv(const ExperimentConfig& c, const EnsembleEstimate& est) {
  const std::size_t d = c.model.dim;
  std::ostringstream s;
  s << "t,mean_weight,mean_weight_stderr";
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) s << ",eta_re_" << i << '_' << j << ",eta_im_" << i << '_' << j;
  for (const auto& o : c.run.observables) s << ',' << o.name << "_mean," << o.name << "_stderr";
  s << '\n';
  for (std::size_t k = 0; k < est.n_out(); ++k) {
    s << format_number(est.times[k]) << ',' << format_number(est.mean_weight[k]) << ','
      << format_number(est.mean_weight_stderr[k]);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j)
        s << ',' << format_number(est.eta[k](i, j).real()) << ',' << format_number(est.eta[k](i, j).imag());
    for (std::size_t q = 0; q < c.run.observables.size(); ++q)
      s << ',' << format_number(est.obs_mean[q][k]) << ',' << format_number(est.obs_stderr[q][k]);
    s << '\n';
  }
  return s.str();
}

inline EnsembleOptions ensemble_options(const ExperimentConfig& c, const CommandOptions& o) {
  EnsembleOptions opt;
  opt.mode = c.run.mode;
  opt.n_traj = c.run.n_traj;
  opt.seeds = SeedPolicy{o.seed.value_or(c.run.master_seed)};
  opt.psi0 = c.run.psi0;
  opt.output_stride = c.output_stride();
  opt.substeps = c.run.substeps;
  for (const auto& q : c.run.observables) opt.observables.push_back(q.matrix);
  opt.mean_equation = false;
  opt.threads = o.threads;
  return opt;
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline Json failures_json(const std::vector<std::string>& f) {
  Json a = Json::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(f.size(), 20); ++i) a.push_back(f[i]);
  return a;
}

}  // namespace detail

inline int cmd_simulate(const ExperimentConfig& c, const CommandOptions& o, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = output_dir(c, o);
  const EnsembleOptions opt = ensemble_options(c, o);
  Json summary = {{"command", "simulate"},
                  {"version", kVersion},
                  {"master_seed", opt.seeds.master_seed},
                  {"mode", to_string(c.run.mode)},
                  {"n_traj_requested", c.run.n_traj}};
  try {
    const EnsembleEstimate est = run_ensemble(c.build_model(), c.time_grid(), opt);
    write_text(dir / "series.csv", series_csv(c, est));
    summary["status"] = "ok";
    summary["n_traj"] = est.n_traj;
    summary["n_failed"] = est.n_failed;
    summary["partial"] = est.n_failed > 0;
    summary["failures"] = detail::failures_json(est.failures);
    summary["series"] = "series.csv";
    summary["wall_seconds"] = detail::seconds_since(t0);
    summary["config"] = to_json(c);
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    log << "simulate: " << est.n_traj << " trajectories (" << est.n_failed << " diverged) -> " << (dir / "series.csv").string()
        << '\n';
    return kExitOk;
  } catch (const Error& e) {
    summary["status"] = "aborted";
    summary["partial"] = true;
    summary["error"] = e.what();
    summary["wall_seconds"] = detail::seconds_since(t0);
    summary["config"] = to_json(c);
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    log << "simulate aborted: " << e.what() << '\n';
    return kExitRuntime;
  }
}

// Covariance grid: `points` evenly spaced grid times in (0, T].
inline std::vector<CovarianceRow> covariance_rows(double gamma, const TimeGrid& grid, std::size_t n_paths,
                                                  std::uint64_t seed, std::size_t points, unsigned threads) {
  if (points == 0 || points > grid.n_steps()) throw Error(Errc::invalid_argument, "covariance points must lie in [1, n_steps]");
  std::vector<std::size_t> steps;
  for (std::size_t i = 1; i <= points; ++i) steps.push_back((grid.n_steps() * i + points / 2) / points);
  return empirical_ou_covariance(gamma, grid, n_paths, SeedPolicy{seed}, steps, threads);
}

inline std::string covariance_csv(const std::vector<CovarianceRow>& rows) {
  std::ostringstream s;
  s << "t,s,analytic,empirical,stderr\n";
  for (const auto& r : rows)
    s << format_number(r.t) << ',' << format_number(r.s) << ',' << format_number(r.analytic) << ','
      << format_number(r.empirical) << ',' << format_number(r.std_error) << '\n';
  return s.str();
}

inline double covariance_coverage(const std::vector<CovarianceRow>& rows) {
  std::size_t inside = 0;
  for (const auto& r : rows) inside += std::abs(r.empirical - r.analytic) <= 3.0 * r.std_error ? 1 : 0;
  return rows.empty() ? 0.0 : static_cast<double>(inside) / static_cast<double>(rows.size());
}

inline int cmd_covariance(double gamma, double T, double dt, std::size_t n_paths, std::uint64_t seed, std::size_t points,
                          unsigned threads, const std::filesystem::path& dir, std::ostream& log) {
  std::vector<CovarianceRow> rows;
  try {
    if (!(gamma >= 0.0)) throw Error(Errc::invalid_argument, "gamma must be non-negative");
    const TimeGrid grid = TimeGrid::from_horizon(dt, T);
    check_ou_stability(gamma, dt);
    rows = covariance_rows(gamma, grid, n_paths, seed, points, threads);
  } catch (const Error& e) {
    log << "covariance: " << e.what() << '\n';
    return kExitValidation;
  }
  std::filesystem::create_directories(dir);
  write_text(dir / "covariance.csv", covariance_csv(rows));
  log << "covariance: " << rows.size() << " rows, " << format_number(100.0 * covariance_coverage(rows))
      << "% within 3 stderr -> " << (dir / "covariance.csv").string() << '\n';
  return kExitOk;
}

namespace detail {

inline Json check_entry(const std::string& name, double statistic, const std::string& rule, double threshold, bool pass) {
  return Json{{"name", name}, {"statistic", statistic}, {"rule", rule}, {"threshold", threshold}, {"pass", pass}};
}

inline bool wants(const ExperimentConfig& c, const std::string& suite) {
  return std::find(c.check.suites.begin(), c.check.suites.end(), suite) != c.check.suites.end();
}

// max over 21 points of x in [-5, 5] of residual / (1 + max|A|).
inline Json consistency_entry(const ModelSpec& m) {
  double worst = 0.0;
  double raw = 0.0;
  for (int i = 0; i <= 20; ++i) {
    const double x = -5.0 + 0.5 * i;
    const double r = consistency_residual(m, x);
    raw = std::max(raw, r);
    worst = std::max(worst, r / consistency_scale(m, x));
  }
  Json e = check_entry("consistency", worst, "<=", 1e-12, worst <= 1e-12);
  e["max_residual"] = raw;
  return e;
}

inline Json martingale_entry(const EnsembleEstimate& est, double c_disc) {
  const MartingaleReport rep = martingale_check(est, c_disc);
  double ratio = 0.0;
  Json pts = Json::array();
  for (const auto& p : rep.points) {
    ratio = std::max(ratio, std::abs(p.statistic) / p.threshold);
    pts.push_back(Json{{"t", p.t}, {"deviation", p.statistic}, {"stderr", p.std_error}, {"threshold", p.threshold}});
  }
  Json e = check_entry("martingale", ratio, "<=", 1.0, rep.pass);
  e["description"] = "max_t |E[weight] - 1| / (3 stderr + c_disc dt)";
  e["points"] = pts;
  return e;
}

inline Json mean_equation_entry(const ModelSpec& m, const EnsembleEstimate& est, double c_fd) {
  const MeanEquationReport rep = mean_equation_residual(m, est, c_fd);
  double ratio = 0.0;
  for (const auto& p : rep.points) ratio = std::max(ratio, p.worst_ratio);
  Json e = check_entry("mean_equation", ratio, "<=", 1.0, rep.pass);
  e["description"] = "max over times and entries of |residual| / (3 stderr + c_fd dt)";
  e["max_residual"] = rep.max_residual;
  return e;
}

inline Json lindblad_entry(const ModelSpec& m, const EnsembleEstimate& est, const StateVector& psi0, double c_disc) {
  const Liouvillian L = build_liouvillian(m);
  const DensityMatrix rho0 = DensityMatrix::pure(psi0);
  double ratio = 0.0;
  double max_dev = 0.0;
  for (std::size_t j = 0; j < est.n_out(); ++j) {
    const DensityMatrix ref = propagate_lindblad(L, rho0, est.times[j]);
    for (std::size_t a = 0; a < m.dim(); ++a)
      for (std::size_t b = 0; b < m.dim(); ++b) {
        const Complex dev = est.eta[j](a, b) - ref(a, b);
        const Complex se = est.eta_stderr[j](a, b);
        max_dev = std::max({max_dev, std::abs(dev.real()), std::abs(dev.imag())});
        ratio = std::max({ratio, std::abs(dev.real()) / (3.0 * se.real() + c_disc * est.dt()),
                          std::abs(dev.imag()) / (3.0 * se.imag() + c_disc * est.dt())});
      }
  }
  Json e = check_entry("lindblad_oracle", ratio, "<=", 1.0, ratio <= 1.0);
  e["description"] = "max over times and entries of |eta - exp(tL) rho0| / (3 stderr + c_disc dt)";
  e["max_deviation"] = max_dev;
  return e;
}

inline Json girsanov_entry(const ExperimentConfig& c, const ModelSpec& m, std::uint64_t seed, unsigned threads) {
  GirsanovOptions g;
  g.n_traj = c.check.girsanov_n_traj;
  g.seeds = SeedPolicy{seed};
  g.psi0 = c.run.psi0;
  g.t_list = c.check.girsanov_times.empty() ? std::vector<double>{c.grid.T} : c.check.girsanov_times;
  g.c_disc = c.check.c_disc;
  g.threads = threads;
  Operator obs = Operator::zero(c.model.dim);
  std::string name = "P0";
  obs(0, 0) = 1.0;
  const NamedObservable* named = c.check.girsanov_observable.empty()
                                     ? (c.run.observables.empty() ? nullptr : &c.run.observables.front())
                                     : c.find_observable(c.check.girsanov_observable);
  if (named) {
    obs = named->matrix;
    name = named->name;
  }
  const GirsanovReport rep = girsanov_crosscheck(m, c.time_grid(), obs, g);
  double ratio = 0.0;
  Json pts = Json::array();
  for (const auto& p : rep.points) {
    ratio = std::max(ratio, std::abs(p.weighted_reference - p.physical) / p.threshold);
    pts.push_back(Json{{"t", p.t},
                       {"reference_weighted", p.weighted_reference},
                       {"reference_stderr", p.weighted_reference_stderr},
                       {"physical", p.physical},
                       {"physical_stderr", p.physical_stderr},
                       {"threshold", p.threshold}});
  }
  Json e = check_entry("girsanov", ratio, "<=", 1.0, rep.pass);
  e["observable"] = name;
  e["description"] = "max_t |E_Q[w <O>] - E_P[<O>]| / (3 hypot(se_Q, se_P) + c_disc dt)";
  e["points"] = pts;
  return e;
}

}  // namespace detail

// Runs the configured suites. "lindblad_oracle" is added whenever the model's
// mean equation is closed (operators independent of x).
inline Json verify_report(const ExperimentConfig& c, const CommandOptions& o) {
  const ModelSpec m = c.build_model();
  const std::uint64_t seed = o.seed.value_or(c.run.master_seed);
  Json checks = Json::array();
  if (detail::wants(c, "consistency")) checks.push_back(detail::consistency_entry(m));

  const bool closed = has_closed_mean_equation(m);
  if (detail::wants(c, "martingale") || detail::wants(c, "mean_equation") || closed) {
    EnsembleOptions opt = ensemble_options(c, o);
    opt.mode = Mode::linear;
    opt.observables.clear();
    opt.mean_equation = detail::wants(c, "mean_equation");
    const EnsembleEstimate est = run_ensemble(m, c.time_grid(), opt);
    if (detail::wants(c, "martingale")) checks.push_back(detail::martingale_entry(est, c.check.c_disc));
    if (detail::wants(c, "mean_equation")) checks.push_back(detail::mean_equation_entry(m, est, c.check.c_fd));
    if (closed) checks.push_back(detail::lindblad_entry(m, est, c.run.psi0, c.check.c_disc));
  }
  if (detail::wants(c, "girsanov")) checks.push_back(detail::girsanov_entry(c, m, seed, o.threads));
  if (detail::wants(c, "ou_covariance")) {
    const auto rows = covariance_rows(c.model.gamma, c.time_grid(), c.check.covariance_n_paths, seed,
                                      c.check.covariance_points, o.threads);
    const double cov = covariance_coverage(rows);
    Json e = detail::check_entry("ou_covariance", cov, ">=", 0.95, cov >= 0.95);
    e["description"] = "fraction of (t, s) points with |empirical - analytic| <= 3 stderr";
    e["points"] = rows.size();
    checks.push_back(e);
  }

  bool all = true;
  for (const auto& e : checks) all = all && e["pass"].get<bool>();
  return Json{{"command", "verify"}, {"version", kVersion}, {"master_seed", seed}, {"pass", all}, {"checks", checks}};
}

inline int cmd_verify(const ExperimentConfig& c, const CommandOptions& o, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = output_dir(c, o);
  Json report;
  int code = kExitOk;
  try {
    report = verify_report(c, o);
    code = report["pass"].get<bool>() ? kExitOk : kExitVerification;
    for (const auto& e : report["checks"])
      log << (e["pass"].get<bool>() ? "PASS " : "FAIL ") << e["name"].get<std::string>() << ": statistic "
          << format_number(e["statistic"].get<double>()) << ' ' << e["rule"].get<std::string>() << ' '
          << format_number(e["threshold"].get<double>()) << '\n';
  } catch (const Error& e) {
    report = Json{{"command", "verify"}, {"version", kVersion}, {"pass", false}, {"status", "aborted"}, {"error", e.what()}};
    log << "verify aborted: " << e.what() << '\n';
    code = kExitRuntime;
  }
  report["wall_seconds"] = detail::seconds_since(t0);
  report["config"] = to_json(c);
  write_text(dir / "verify.json", report.dump(2) + "\n");
  return code;
}

}  // namespace ouqt
