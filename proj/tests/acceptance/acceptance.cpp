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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Every tolerance below is fixed here and not read from configuration.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ouqt/dynamics.hpp"
#include "ouqt/ensemble.hpp"
#include "ouqt/model.hpp"
#include "ouqt/noise.hpp"
#include "ouqt/oracle.hpp"
#include "test_util.hpp"

namespace {

using namespace ouqt;
using namespace ouqt::qubit;
using ouqt::testing::random_hermitian;
using ouqt::testing::random_operator;
using ouqt::testing::random_unit;

constexpr std::uint64_t kSeed = 20261016;
constexpr double kCDisc = 5.0;
constexpr double kCFd = 5.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const Operator kZero2 = Operator::zero(2);

ModelSpec decay_model() {
  return make_measurement_model(OperatorPolynomial::constant(Complex(0.5) * sigma_z()),
                                OperatorPolynomial::constant(sigma_minus()), 1.0);
}

ModelSpec dephasing_model(double gamma) { return make_random_hamiltonian(kZero2, sigma_z(), gamma); }

EnsembleOptions options(std::size_t n, std::size_t stride) {
  EnsembleOptions o;
  o.n_traj = n;
  o.seeds = SeedPolicy{kSeed};
  o.psi0 = plus();
  o.output_stride = stride;
  o.mean_equation = false;
  return o;
}

Outcome consistency() {
  constexpr double kTol = 1e-12;
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> gamma_dist(0.0, 2.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t d = 2 + static_cast<std::size_t>(i % 3);
    const double gamma = gamma_dist(rng);
    ModelSpec m = [&] {
      if (i % 2 == 1) return make_random_hamiltonian(random_hermitian(rng, d), random_hermitian(rng, d), gamma);
      std::vector<Operator> h, b;
      const std::size_t nh = 1 + static_cast<std::size_t>(rng() % 3), nb = 1 + static_cast<std::size_t>(rng() % 3);
      for (std::size_t k = 0; k < nh; ++k) h.push_back(random_hermitian(rng, d));
      for (std::size_t k = 0; k < nb; ++k) b.push_back(random_operator(rng, d));
      return make_measurement_model(OperatorPolynomial(h), OperatorPolynomial(b), gamma);
    }();
    for (int j = 0; j <= 20; ++j) {
      const double x = -5.0 + 0.5 * j;
      worst = std::max(worst, consistency_residual(m, x) / consistency_scale(m, x));
    }
  }
  return {worst <= kTol, fmt("max residual/(1+|A|) = %.3e over 100 models x 21 points (tol %.0e)", worst, kTol)};
}

Outcome martingale() {
  const EnsembleEstimate est = run_ensemble(decay_model(), TimeGrid::from_horizon(1e-3, 1.0), options(10000, 10));
  const MartingaleReport rep = martingale_check(est, kCDisc);
  double ratio = 0.0, dev = 0.0;
  for (const auto& p : rep.points) {
    ratio = std::max(ratio, std::abs(p.statistic) / p.threshold);
    dev = std::max(dev, std::abs(p.statistic));
  }
  return {rep.pass, fmt("max |E w - 1| = %.3e, worst ratio to 3se+5dt = %.3f over %zu output times", dev, ratio,
                        rep.points.size())};
}

// max over paths and steps of | ||psi||^2 - 1 | on nested grids sharing Brownian paths.
Outcome unitarity() {
  const ModelSpec m = make_random_hamiltonian(sigma_z(), sigma_x(), 1.0);
  const std::vector<std::size_t> substeps = {16, 4, 1};
  const double fine_dt = 2.5e-4;
  std::vector<double> err(substeps.size(), 0.0);
  for (std::size_t p = 0; p < 20; ++p) {
    const NormalStream stream(SeedPolicy{kSeed}.stream_seed(p));
    for (std::size_t l = 0; l < substeps.size(); ++l) {
      const TimeGrid g = TimeGrid::from_horizon(fine_dt * static_cast<double>(substeps[l]), 1.0);
      const Trajectory tr = propagate_linear(plus(), make_noise_path(g, 1.0, stream, substeps[l]), m);
      for (const auto& s : tr.states) err[l] = std::max(err[l], std::abs(s.norm_sq() - 1.0));
    }
  }
  const double r1 = err[0] / err[1], r2 = err[1] / err[2];
  const bool pass = r1 >= 1.5 && r1 <= 2.7 && r2 >= 1.5 && r2 <= 2.7;
  return {pass, fmt("max norm defect %.3e, %.3e, %.3e at dt 4e-3, 1e-3, 2.5e-4; ratios %.3f, %.3f (need [1.5, 2.7])",
                    err[0], err[1], err[2], r1, r2)};
}

Outcome commuting_oracle() {
  const ModelSpec m = dephasing_model(1.0);
  const std::vector<std::size_t> substeps = {16, 4, 1};
  const double fine_dt = 2.5e-4;
  std::vector<double> sq(substeps.size(), 0.0);
  for (std::size_t p = 0; p < 100; ++p) {
    const NormalStream stream(SeedPolicy{kSeed}.stream_seed(p));
    for (std::size_t l = 0; l < substeps.size(); ++l) {
      const TimeGrid g = TimeGrid::from_horizon(fine_dt * static_cast<double>(substeps[l]), 1.0);
      const NoisePath noise = make_noise_path(g, 1.0, stream, substeps[l]);
      const Trajectory tr = propagate_linear(plus(), noise, m);
      const StateVector exact = exact_commuting_solution(plus(), kZero2, sigma_z(), noise.X.back(), 1.0);
      sq[l] += (tr.states.back() - exact).norm_sq();
    }
  }
  std::vector<double> rms;
  for (double s : sq) rms.push_back(std::sqrt(s / 100.0));
  const double r1 = rms[0] / rms[1], r2 = rms[1] / rms[2];
  const bool pass = r1 >= 1.6 && r1 <= 2.6 && r2 >= 1.6 && r2 <= 2.6;
  return {pass, fmt("RMS error at T=1 %.3e, %.3e, %.3e; ratios %.3f, %.3f (need [1.6, 2.6])", rms[0], rms[1], rms[2], r1,
                    r2)};
}

Outcome coloured_dephasing() {
  // 1/2 E[exp(-2i X_1)] for Gaussian X_1 with Var = (1 - e^{-2}) / 2.
  const double oracle = 0.5 * std::exp(-(1.0 - std::exp(-2.0)));
  const TimeGrid g = TimeGrid::from_horizon(1e-3, 1.0);

  // Direct average of 1/2 cos(2 X_1) over sampled OU paths, independent of the state equations.
  const std::size_t n_mc = 100000;
  double s = 0.0, s2 = 0.0;
  for (std::size_t p = 0; p < n_mc; ++p) {
    const NormalStream stream(SeedPolicy{kSeed ^ 0xabcdefULL}.stream_seed(p));
    const double x = ou_path(sample_wiener(g, stream), 1.0, g).back();
    const double v = 0.5 * std::cos(2.0 * x);
    s += v;
    s2 += v * v;
  }
  const double mc = s / n_mc;
  const double mc_se = std::sqrt((s2 / n_mc - mc * mc) / (n_mc - 1));
  const bool oracle_ok = std::abs(mc - oracle) <= 3.0 * mc_se + kCDisc * g.dt();

  const EnsembleEstimate est = run_ensemble(dephasing_model(1.0), g, options(10000, 1000));
  const Complex eta = est.eta.back()(0, 1);
  const Complex se = est.eta_stderr.back()(0, 1);
  const double bound = 3.0 * std::hypot(se.real(), se.imag()) + kCDisc * g.dt();
  const double dev = std::abs(std::abs(eta) - oracle);
  return {oracle_ok && dev <= bound,
          fmt("|eta01(1)| = %.5f vs %.5f, |dev| %.2e <= %.2e; OU-sample check %.5f +- %.1e", std::abs(eta), oracle, dev,
              bound, mc, mc_se)};
}

Outcome markovian_limit() {
  const ModelSpec m = dephasing_model(0.0);
  const Liouvillian L = build_liouvillian(m);
  const TimeGrid g = TimeGrid::from_horizon(1e-3, 1.0);
  const EnsembleEstimate est = run_ensemble(m, g, options(10000, 10));
  bool pass = true;
  double ratio = 0.0, oracle_gap = 0.0;
  for (std::size_t j = 0; j < est.n_out(); ++j) {
    const double t = est.times[j];
    const Complex ref = propagate_lindblad(L, DensityMatrix::pure(plus()), t)(0, 1);
    oracle_gap = std::max(oracle_gap, std::abs(ref - Complex(0.5 * std::exp(-2.0 * t))));
    const Complex se = est.eta_stderr[j](0, 1);
    const double bound = 3.0 * std::hypot(se.real(), se.imag()) + kCDisc * g.dt();
    const double dev = std::abs(est.eta[j](0, 1) - ref);
    ratio = std::max(ratio, dev / bound);
    pass = pass && dev <= bound;
  }
  pass = pass && oracle_gap <= 1e-12;
  return {pass, fmt("worst |eta01 - exp(tL)| / (3se+5dt) = %.3f over %zu times; propagator vs 0.5e^{-2t} gap %.1e", ratio,
                    est.n_out(), oracle_gap)};
}

Outcome girsanov() {
  GirsanovOptions go;
  go.n_traj = 10000;
  go.seeds = SeedPolicy{kSeed};
  go.psi0 = plus();
  go.t_list = {0.25, 0.5, 1.0};
  go.c_disc = kCDisc;
  const GirsanovReport rep = girsanov_crosscheck(decay_model(), TimeGrid::from_horizon(1e-3, 1.0), sigma_z(), go);
  std::string d;
  for (const auto& p : rep.points)
    d += fmt("t=%.2f: %.4f vs %.4f (bound %.1e); ", p.t, p.weighted_reference, p.physical, p.threshold);
  return {rep.pass, d};
}

Outcome mean_equation() {
  // dt and dt/2 on the same Brownian paths: the coarse run sums pairs of fine increments.
  const ModelSpec m = dephasing_model(1.0);
  auto run = [&](double dt, std::size_t substeps) {
    const TimeGrid g = TimeGrid::from_horizon(dt, 1.0);
    EnsembleOptions o = options(10000, static_cast<std::size_t>(std::llround(0.05 / dt)));
    o.substeps = substeps;
    o.mean_equation = true;
    return mean_equation_residual(m, run_ensemble(m, g, o), kCFd);
  };
  const MeanEquationReport coarse = run(1e-3, 2);
  const MeanEquationReport fine = run(5e-4, 1);
  double ratio_c = 0.0, ratio_f = 0.0, se = 0.0;
  for (const auto& p : coarse.points) ratio_c = std::max(ratio_c, p.worst_ratio);
  for (const auto& p : fine.points) {
    ratio_f = std::max(ratio_f, p.worst_ratio);
    se = std::max(se, p.max_stderr);
  }
  const bool decreases = fine.max_residual < coarse.max_residual;
  return {coarse.pass && fine.pass && decreases,
          fmt("max residual %.4e (dt=1e-3) -> %.4e (dt=5e-4): %s; worst ratio to 3se+c_fd*dt %.3f, %.3f; max stderr %.2e",
              coarse.max_residual, fine.max_residual, decreases ? "decreases" : "does not decrease", ratio_c, ratio_f, se)};
}

double covariance_oracle(double t, double s, double gamma) {
  const double lo = std::min(t, s);
  if (gamma == 0.0) return lo;
  return std::exp(-gamma * std::abs(t - s)) * (1.0 - std::exp(-2.0 * gamma * lo)) / (2.0 * gamma);
}

Outcome ou_covariance_grid() {
  const TimeGrid g = TimeGrid::from_horizon(1e-3, 1.0);
  const std::vector<std::size_t> steps = {200, 400, 600, 800, 1000};
  bool pass = true;
  std::string d;
  for (double gamma : {0.0, 0.5, 2.0}) {
    const auto rows = empirical_ou_covariance(gamma, g, 100000, SeedPolicy{kSeed}, steps);
    std::size_t inside = 0;
    for (const auto& r : rows) inside += std::abs(r.empirical - covariance_oracle(r.t, r.s, gamma)) <= 3.0 * r.std_error;
    const double frac = static_cast<double>(inside) / static_cast<double>(rows.size());
    pass = pass && frac >= 0.95;
    d += fmt("gamma=%.1f: %zu/%zu within 3se; ", gamma, inside, rows.size());
  }
  return {pass, d};
}

Outcome nonlinear_identity() {
  std::mt19937_64 rng(kSeed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t d = 2 + static_cast<std::size_t>(i % 3);
    const ModelSpec m = make_random_hamiltonian(random_hermitian(rng, d), random_hermitian(rng, d), 2.0 * unif(rng));
    const StateVector psi = random_unit(rng, d);
    const double dt = 1e-3 * (0.1 + unif(rng));
    const double x = normal(rng);
    const double dW = std::sqrt(dt) * normal(rng);
    const StateVector lin = step_linear(psi, x, dW, dt, m).normalized();
    const StateVector nl = step_nonlinear(psi, x, dW, dt, m).state;
    for (std::size_t k = 0; k < d; ++k) worst = std::max(worst, std::abs(lin[k] - nl[k]));
  }
  return {worst <= 1e-12, fmt("max |nonlinear - normalized linear| = %.3e over 1000 steps (tol 1e-12)", worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"consistency condition", consistency},
      {"martingale weight", martingale},
      {"random-Hamiltonian unitarity", unitarity},
      {"exact commuting oracle", commuting_oracle},
      {"coloured dephasing", coloured_dephasing},
      {"Markovian limit", markovian_limit},
      {"Girsanov cross-check", girsanov},
      {"mean-equation residual", mean_equation},
      {"OU covariance", ou_covariance_grid},
      {"nonlinear/linear identity", nonlinear_identity},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s [%zu] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
