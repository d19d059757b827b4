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

// Monte Carlo ensembles over many trajectories with deterministic seeding, and
// the structural cross-checks built on them (martingale norm, Girsanov measure
// change, mean-state equation with memory term).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ouqt/dynamics.hpp"
#include "ouqt/error.hpp"
#include "ouqt/linalg.hpp"
#include "ouqt/model.hpp"
#include "ouqt/noise.hpp"
#include "ouqt/parallel.hpp"

namespace ouqt {

struct EnsembleOptions {
  Mode mode = Mode::linear;
  std::size_t n_traj = 1000;
  SeedPolicy seeds{};
  StateVector psi0;
  // Estimates are recorded every output_stride steps (must divide n_steps).
  std::size_t output_stride = 1;
  // Each increment is drawn as the sum of `substeps` finer draws; see sample_wiener.
  std::size_t substeps = 1;
  std::vector<Operator> observables;
  // Track E[L(X_t)[rho_t]] and the per-trajectory finite-difference residual of the mean equation.
  bool mean_equation = true;
  unsigned threads = 0;
  double max_failure_fraction = 0.01;
};

struct EnsembleEstimate {
  TimeGrid grid{1.0, 1};
  Mode mode = Mode::linear;
  std::size_t n_traj = 0;    // trajectories that contributed
  std::size_t n_failed = 0;  // diverged and excluded
  std::vector<std::string> failures;
  std::size_t output_stride = 1;
  std::vector<std::size_t> steps;
  std::vector<double> times;

  // Entry-wise standard errors are stored as complex numbers: (se of Re, se of Im).
  std::vector<DensityMatrix> eta;
  std::vector<Operator> eta_stderr;
  std::vector<Operator> memory;  // E[X_t rho_t]
  std::vector<Operator> memory_stderr;
  std::vector<Operator> generator;  // E[L(X_t)[rho_t]], empty unless tracked
  std::vector<Operator> generator_stderr;
  // Mean over trajectories of (rho(t+) - rho(t-)) / (t+ - t-) - L(X_t)[rho_t] at interior output times;
  // boundary entries are zero.
  std::vector<Operator> fd_residual;
  std::vector<Operator> fd_residual_stderr;

  std::vector<double> mean_weight;
  std::vector<double> mean_weight_stderr;

  std::vector<Operator> observables;
  std::vector<std::vector<double>> obs_mean;  // [observable][time] of <psi|O psi>
  std::vector<std::vector<double>> obs_stderr;
  std::vector<std::vector<double>> obs_weight_cov;  // sample Cov(<psi|O psi>, ||psi||^2)

  Measure measure() const { return measure_of(mode); }
  std::size_t n_out() const { return steps.size(); }
  double dt() const { return grid.dt(); }

  std::size_t index_of_time(double t) const {
    for (std::size_t j = 0; j < times.size(); ++j)
      if (std::abs(times[j] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return j;
    throw Error(Errc::invalid_argument, "time " + std::to_string(t) + " is not an output time");
  }
};

namespace detail {

// Flat per-output-time sample layout, re/im interleaved for operator blocks.
struct SampleLayout {
  std::size_t d2 = 0;
  std::size_t n_obs = 0;
  bool generator = false;

  std::size_t eta() const { return 0; }
  std::size_t memory() const { return 2 * d2; }
  std::size_t generator_at() const { return 4 * d2; }
  std::size_t residual() const { return 6 * d2; }
  std::size_t weight() const { return generator ? 8 * d2 : 4 * d2; }
  std::size_t obs() const { return weight() + 1; }
  std::size_t obs_cross() const { return obs() + n_obs; }
  std::size_t width() const { return obs_cross() + n_obs; }
};

// Sums of (sample - shift) and its square. A shift near the data (the
// initial-state sample) avoids cancellation in the variance.
struct Moments {
  std::size_t count = 0;
  std::vector<double> sum;
  std::vector<double> sum_sq;
  std::vector<std::pair<std::size_t, std::string>> failures;

  explicit Moments(std::size_t n = 0) : sum(n, 0.0), sum_sq(n, 0.0) {}

  void add(const std::vector<double>& sample, const std::vector<double>& shift) {
    ++count;
    for (std::size_t k = 0; k < sample.size(); ++k) {
      const double v = sample[k] - shift[k];
      sum[k] += v;
      sum_sq[k] += v * v;
    }
  }

  void merge(const Moments& o) {
    count += o.count;
    for (std::size_t k = 0; k < sum.size(); ++k) {
      sum[k] += o.sum[k];
      sum_sq[k] += o.sum_sq[k];
    }
    failures.insert(failures.end(), o.failures.begin(), o.failures.end());
  }
};

// Pairwise reduction over blocks in index order; the tree depends only on the block count.
inline Moments reduce_pairwise(std::vector<Moments>& blocks, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return std::move(blocks[lo]);
  const std::size_t mid = lo + (hi - lo) / 2;
  Moments left = reduce_pairwise(blocks, lo, mid);
  Moments right = reduce_pairwise(blocks, mid, hi);
  left.merge(right);
  return left;
}

inline void put(std::vector<double>& s, std::size_t offset, const Operator& a) {
  const auto data = a.data();
  for (std::size_t k = 0; k < data.size(); ++k) {
    s[offset + 2 * k] = data[k].real();
    s[offset + 2 * k + 1] = data[k].imag();
  }
}

struct TrajectoryRecord {
  std::vector<Operator> rho;
  std::vector<double> x;
  std::vector<Operator> gen;
};

}  // namespace detail

inline std::size_t ensemble_block_size(std::size_t n_traj) {
  return std::max<std::size_t>(128, (n_traj + 63) / 64);
}

// Runs n_traj trajectories of the requested mode. Trajectory i draws its noise
// from NormalStream(seeds.stream_seed(i)). Reference-measure modes average
// unnormalized projectors (eta_t = E_Q |psi_t><psi_t|); physical-measure modes
// average normalized states. Results do not depend on the thread count.
inline EnsembleEstimate run_ensemble(const ModelSpec& m, const TimeGrid& grid, const EnsembleOptions& opt) {
  if (opt.n_traj < 2) throw Error(Errc::invalid_argument, "an ensemble needs at least two trajectories");
  if (opt.output_stride == 0 || grid.n_steps() % opt.output_stride != 0)
    throw Error(Errc::invalid_argument, "output_stride must divide the number of steps");
  if (opt.psi0.dim() != m.dim()) throw Error(Errc::dimension_mismatch, "initial state does not match the model");
  if (std::abs(opt.psi0.norm_sq() - 1.0) > 1e-9) throw Error(Errc::not_normalized, "initial state must be normalized");
  if (opt.mode == Mode::density_linear && m.kind() != ModelKind::random_hamiltonian)
    throw Error(Errc::wrong_mode, "density_linear mode needs a random_hamiltonian model");
  for (const auto& o : opt.observables) {
    if (o.dim() != m.dim()) throw Error(Errc::dimension_mismatch, "observable dimension does not match the model");
    if (!is_hermitian(o)) throw Error(Errc::not_hermitian, "observables must be Hermitian");
  }
  check_ou_stability(m.gamma(), grid.dt());

  const std::size_t d = m.dim();
  const std::size_t n_out = grid.n_steps() / opt.output_stride + 1;
  detail::SampleLayout layout{d * d, opt.observables.size(), opt.mean_equation};
  const std::size_t width = layout.width();

  auto record_trajectory = [&](std::size_t i) {
    const NormalStream stream(opt.seeds.stream_seed(i));
    const auto dW = sample_wiener(grid, stream, opt.substeps);
    detail::TrajectoryRecord rec;
    rec.rho.reserve(n_out);
    rec.x.reserve(n_out);
    auto keep = [&](std::size_t k, const Operator& rho, double x) {
      if (k % opt.output_stride != 0) return;
      rec.rho.push_back(rho);
      rec.x.push_back(x);
      if (opt.mean_equation) rec.gen.push_back(lindblad_apply(m, x, rho));
    };
    switch (opt.mode) {
      case Mode::linear: {
        const auto X = ou_path(dW, m.gamma(), grid);
        evolve_linear(opt.psi0, m, grid, dW, X,
                      [&](std::size_t k, const StateVector& psi, double x) {
                        if (k % opt.output_stride == 0) keep(k, outer(psi), x);
                      });
        break;
      }
      case Mode::nonlinear:
        evolve_nonlinear(opt.psi0, m, grid, dW, [&](std::size_t k, const StateVector& psi, double x, double, double) {
          if (k % opt.output_stride == 0) keep(k, outer(psi), x);
        });
        break;
      case Mode::density_linear: {
        const auto X = ou_path(dW, m.gamma(), grid);
        evolve_density_linear(DensityMatrix::pure(opt.psi0), m, grid, dW, X,
                              [&](std::size_t k, const DensityMatrix& rho, double x) { keep(k, rho.op(), x); });
        break;
      }
      case Mode::sme:
        evolve_sme(DensityMatrix::pure(opt.psi0), m, grid, dW,
                   [&](std::size_t k, const DensityMatrix& rho, double x, double) { keep(k, rho.op(), x); });
        break;
    }
    return rec;
  };

  auto samples_of = [&](const detail::TrajectoryRecord& rec, std::size_t j, std::vector<double>& s) {
    std::fill(s.begin(), s.end(), 0.0);
    const Operator& rho = rec.rho[j];
    detail::put(s, layout.eta(), rho);
    detail::put(s, layout.memory(), Complex(rec.x[j]) * rho);
    if (opt.mean_equation) {
      detail::put(s, layout.generator_at(), rec.gen[j]);
      if (j > 0 && j + 1 < n_out) {
        const double span = 2.0 * grid.dt() * static_cast<double>(opt.output_stride);
        Operator r = (rec.rho[j + 1] - rec.rho[j - 1]) * Complex(1.0 / span);
        r -= rec.gen[j];
        detail::put(s, layout.residual(), r);
      }
    }
    const double w = rho.trace().real();
    s[layout.weight()] = w;
    for (std::size_t q = 0; q < opt.observables.size(); ++q) {
      const double o = (opt.observables[q] * rho).trace().real();
      s[layout.obs() + q] = o;
      s[layout.obs_cross() + q] = o * w;
    }
  };

  std::vector<double> shift(n_out * width);
  {
    detail::TrajectoryRecord init;
    const Operator rho0 = outer(opt.psi0);
    init.rho.assign(n_out, rho0);
    init.x.assign(n_out, 0.0);
    if (opt.mean_equation) init.gen.assign(n_out, lindblad_apply(m, 0.0, rho0));
    std::vector<double> sample(width);
    for (std::size_t j = 0; j < n_out; ++j) {
      samples_of(init, j, sample);
      std::copy(sample.begin(), sample.end(), shift.begin() + static_cast<std::ptrdiff_t>(j * width));
    }
  }

  const std::size_t block = ensemble_block_size(opt.n_traj);
  const std::size_t n_blocks = (opt.n_traj + block - 1) / block;
  std::vector<detail::Moments> blocks(n_blocks);
  parallel_for(n_blocks, opt.threads, [&](std::size_t b) {
    detail::Moments acc(n_out * width);
    std::vector<double> sample(width);
    std::vector<double> flat(n_out * width);
    const std::size_t end = std::min(opt.n_traj, (b + 1) * block);
    for (std::size_t i = b * block; i < end; ++i) {
      detail::TrajectoryRecord rec;
      try {
        rec = record_trajectory(i);
      } catch (const Error& e) {
        if (e.code() != Errc::overflow && e.code() != Errc::vanishing_norm && e.code() != Errc::not_hermitian) throw;
        acc.failures.emplace_back(i, e.what());
        continue;
      }
      for (std::size_t j = 0; j < n_out; ++j) {
        samples_of(rec, j, sample);
        std::copy(sample.begin(), sample.end(), flat.begin() + static_cast<std::ptrdiff_t>(j * width));
      }
      // Finite but huge states would overflow the second moments.
      if (!std::all_of(flat.begin(), flat.end(), [](double v) { return std::isfinite(v * v); })) {
        acc.failures.emplace_back(i, "overflow: sample moments are not representable");
        continue;
      }
      acc.add(flat, shift);
    }
    blocks[b] = std::move(acc);
  });
  detail::Moments total = detail::reduce_pairwise(blocks, 0, n_blocks);

  EnsembleEstimate est;
  est.grid = grid;
  est.mode = opt.mode;
  est.n_traj = total.count;
  est.n_failed = total.failures.size();
  for (const auto& [i, msg] : total.failures) est.failures.push_back("trajectory " + std::to_string(i) + ": " + msg);
  if (static_cast<double>(est.n_failed) > opt.max_failure_fraction * static_cast<double>(opt.n_traj))
    throw Error(Errc::aborted, std::to_string(est.n_failed) + " of " + std::to_string(opt.n_traj) +
                                   " trajectories diverged" + (est.failures.empty() ? "" : " (first: " + est.failures.front() + ")"));
  if (est.n_traj < 2) throw Error(Errc::aborted, "fewer than two trajectories survived");
  est.output_stride = opt.output_stride;
  est.observables = opt.observables;

  const double n = static_cast<double>(est.n_traj);
  auto mean_at = [&](std::size_t k) { return shift[k] + total.sum[k] / n; };
  auto se_at = [&](std::size_t k) {
    const double mu = total.sum[k] / n;
    const double var = std::max(0.0, (total.sum_sq[k] - n * mu * mu) / (n - 1.0));
    return std::sqrt(var / n);
  };
  auto op_at = [&](std::size_t base, auto&& f) {
    Operator r(d);
    for (std::size_t k = 0; k < d * d; ++k) r(k / d, k % d) = Complex(f(base + 2 * k), f(base + 2 * k + 1));
    return r;
  };

  est.obs_mean.assign(opt.observables.size(), {});
  est.obs_stderr.assign(opt.observables.size(), {});
  est.obs_weight_cov.assign(opt.observables.size(), {});
  for (std::size_t j = 0; j < n_out; ++j) {
    const std::size_t base = j * width;
    est.steps.push_back(j * opt.output_stride);
    est.times.push_back(grid.t(j * opt.output_stride));
    est.eta.emplace_back(op_at(base + layout.eta(), mean_at));
    est.eta_stderr.push_back(op_at(base + layout.eta(), se_at));
    est.memory.push_back(op_at(base + layout.memory(), mean_at));
    est.memory_stderr.push_back(op_at(base + layout.memory(), se_at));
    if (opt.mean_equation) {
      est.generator.push_back(op_at(base + layout.generator_at(), mean_at));
      est.generator_stderr.push_back(op_at(base + layout.generator_at(), se_at));
      est.fd_residual.push_back(op_at(base + layout.residual(), mean_at));
      est.fd_residual_stderr.push_back(op_at(base + layout.residual(), se_at));
    }
    est.mean_weight.push_back(mean_at(base + layout.weight()));
    est.mean_weight_stderr.push_back(se_at(base + layout.weight()));
    for (std::size_t q = 0; q < opt.observables.size(); ++q) {
      const std::size_t ko = base + layout.obs() + q;
      est.obs_mean[q].push_back(mean_at(ko));
      est.obs_stderr[q].push_back(se_at(ko));
      const double cross = mean_at(base + layout.obs_cross() + q);
      const double cov = n / (n - 1.0) * (cross - mean_at(ko) * mean_at(base + layout.weight()));
      est.obs_weight_cov[q].push_back(cov);
    }
  }
  return est;
}

struct SeriesPoint {
  double t = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
};

namespace detail {

inline std::size_t observable_index(const EnsembleEstimate& est, const Operator& o) {
  if (o.dim() != est.eta.front().dim()) throw Error(Errc::dimension_mismatch, "observable dimension mismatch");
  for (std::size_t q = 0; q < est.observables.size(); ++q)
    if (est.observables[q] == o) return q;
  throw Error(Errc::invalid_argument, "observable was not tracked by this ensemble");
}

}  // namespace detail

// Tr(O eta_t) with the per-trajectory standard error. For reference-measure runs
// this is the unnormalized Q-average E_Q <psi|O psi>.
inline std::vector<SeriesPoint> observable_series(const EnsembleEstimate& est, const Operator& observable) {
  if (!is_hermitian(observable)) throw Error(Errc::not_hermitian, "observable must be Hermitian");
  const std::size_t q = detail::observable_index(est, observable);
  std::vector<SeriesPoint> out;
  for (std::size_t j = 0; j < est.n_out(); ++j) out.push_back({est.times[j], est.obs_mean[q][j], est.obs_stderr[q][j]});
  return out;
}

// Tr(O eta_t) / Tr(eta_t), standard error by the delta method.
inline std::vector<SeriesPoint> normalized_observable_series(const EnsembleEstimate& est, const Operator& observable) {
  if (!is_hermitian(observable)) throw Error(Errc::not_hermitian, "observable must be Hermitian");
  const std::size_t q = detail::observable_index(est, observable);
  const double n = static_cast<double>(est.n_traj);
  std::vector<SeriesPoint> out;
  for (std::size_t j = 0; j < est.n_out(); ++j) {
    const double w = est.mean_weight[j];
    const double o = est.obs_mean[q][j];
    const double r = o / w;
    const double var_o = est.obs_stderr[q][j] * est.obs_stderr[q][j] * n;
    const double var_w = est.mean_weight_stderr[j] * est.mean_weight_stderr[j] * n;
    const double var = std::max(0.0, var_o - 2.0 * r * est.obs_weight_cov[q][j] + r * r * var_w);
    out.push_back({est.times[j], r, std::sqrt(var / n) / std::abs(w)});
  }
  return out;
}

struct CheckPoint {
  double t = 0.0;
  double statistic = 0.0;
  double std_error = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct MartingaleReport {
  std::vector<CheckPoint> points;  // statistic = mean weight - 1
  bool pass = false;
};

// |E_Q ||psi_t||^2 - 1| <= 3 stderr + c_disc dt at every output time.
inline MartingaleReport martingale_check(const EnsembleEstimate& est, double c_disc = 5.0) {
  if (est.measure() != Measure::reference)
    throw Error(Errc::wrong_mode, "martingale_check needs a reference-measure (linear) ensemble");
  MartingaleReport rep;
  rep.pass = true;
  for (std::size_t j = 0; j < est.n_out(); ++j) {
    CheckPoint p;
    p.t = est.times[j];
    p.statistic = est.mean_weight[j] - 1.0;
    p.std_error = est.mean_weight_stderr[j];
    p.threshold = 3.0 * p.std_error + c_disc * est.dt();
    p.pass = std::abs(p.statistic) <= p.threshold;
    rep.pass = rep.pass && p.pass;
    rep.points.push_back(p);
  }
  return rep;
}

struct GirsanovPoint {
  double t = 0.0;
  double weighted_reference = 0.0;  // E_Q[||psi_t||^2 <psi_hat|O psi_hat>]
  double weighted_reference_stderr = 0.0;
  double physical = 0.0;  // E_P[<psi_hat|O psi_hat>]
  double physical_stderr = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct GirsanovReport {
  std::vector<GirsanovPoint> points;
  bool pass = false;
};

struct GirsanovOptions {
  std::size_t n_traj = 10000;  // per side
  SeedPolicy seeds{};          // the physical side uses a derived master seed
  StateVector psi0;
  std::vector<double> t_list;
  double c_disc = 5.0;
  unsigned threads = 0;
};

inline SeedPolicy physical_side_seeds(const SeedPolicy& s) { return SeedPolicy{avalanche(s.master_seed ^ 0x5bd1e9955bd1e995ULL)}; }

// Two independent estimators of the same physical mean: weighted linear
// trajectories under Q against normalized trajectories under the physical measure.
inline GirsanovReport girsanov_crosscheck(const ModelSpec& m, const TimeGrid& grid, const Operator& observable,
                                          const GirsanovOptions& g) {
  if (!is_hermitian(observable)) throw Error(Errc::not_hermitian, "observable must be Hermitian");
  EnsembleOptions opt;
  opt.n_traj = g.n_traj;
  opt.psi0 = g.psi0;
  opt.observables = {observable};
  opt.mean_equation = false;
  opt.threads = g.threads;

  // Output only on the gcd stride of the requested times.
  std::size_t stride = grid.n_steps();
  std::vector<std::size_t> wanted;
  for (double t : g.t_list) {
    const double kd = std::round(t / grid.dt());
    if (t < 0.0 || kd > static_cast<double>(grid.n_steps()) || std::abs(kd * grid.dt() - t) > 1e-9 * std::max(1.0, t))
      throw Error(Errc::invalid_argument, "girsanov time " + std::to_string(t) + " is not on the grid");
    const auto k = static_cast<std::size_t>(kd);
    wanted.push_back(k);
    if (k > 0) stride = std::gcd(stride, k);
  }
  opt.output_stride = stride;

  opt.mode = Mode::linear;
  opt.seeds = g.seeds;
  const EnsembleEstimate ref = run_ensemble(m, grid, opt);
  opt.mode = Mode::nonlinear;
  opt.seeds = physical_side_seeds(g.seeds);
  const EnsembleEstimate phys = run_ensemble(m, grid, opt);

  GirsanovReport rep;
  rep.pass = true;
  for (std::size_t k : wanted) {
    const std::size_t j = k / stride;
    GirsanovPoint p;
    p.t = grid.t(k);
    p.weighted_reference = ref.obs_mean[0][j];
    p.weighted_reference_stderr = ref.obs_stderr[0][j];
    p.physical = phys.obs_mean[0][j];
    p.physical_stderr = phys.obs_stderr[0][j];
    const double combined = std::hypot(p.weighted_reference_stderr, p.physical_stderr);
    p.threshold = 3.0 * combined + g.c_disc * grid.dt();
    p.pass = std::abs(p.weighted_reference - p.physical) <= p.threshold;
    rep.pass = rep.pass && p.pass;
    rep.points.push_back(p);
  }
  return rep;
}

struct MeanEquationPoint {
  double t = 0.0;
  double residual = 0.0;        // max |entry| of finite-difference d eta/dt - RHS
  double worst_margin = 0.0;    // max over entries of |R| - (3 se + c_fd dt); <= 0 passes
  double worst_ratio = 0.0;     // max over entries of |R| / (3 se + c_fd dt)
  double max_stderr = 0.0;
  bool pass = false;
};

struct MeanEquationReport {
  std::vector<MeanEquationPoint> points;
  double max_residual = 0.0;
  bool pass = false;
};

// Right-hand side of the mean-state equation assembled from estimated eta and E[X rho]:
//   -i[H, eta] - 1/2 [K, [K, eta]] + i gamma [K, E[X rho]]   (random Hamiltonian)
//   E[L(X_t)[rho_t]]                                           (general, from tracked generator means)
inline Operator mean_equation_rhs(const ModelSpec& m, const EnsembleEstimate& est, std::size_t j) {
  if (m.kind() == ModelKind::random_hamiltonian) {
    const Operator& K = m.coupling();
    const Operator& eta = est.eta[j].op();
    Operator r = Complex(0.0, -1.0) * commutator(m.static_hamiltonian(), eta);
    r.add_scaled(-0.5, commutator(K, commutator(K, eta)));
    r.add_scaled(Complex(0.0, m.gamma()), commutator(K, est.memory[j]));
    return r;
  }
  if (est.generator.empty()) throw Error(Errc::wrong_mode, "estimate carries no generator means");
  return est.generator[j];
}

// Central finite difference of eta over neighbouring output times against the
// mean-equation right-hand side. Standard errors come from the per-trajectory
// residuals, so they include the martingale noise of the finite difference.
inline MeanEquationReport mean_equation_residual(const ModelSpec& m, const EnsembleEstimate& est, double c_fd = 5.0) {
  if (est.measure() != Measure::reference)
    throw Error(Errc::wrong_mode, "mean_equation_residual needs a reference-measure (linear) ensemble");
  if (est.fd_residual.empty()) throw Error(Errc::wrong_mode, "ensemble was run without mean-equation tracking");
  if (est.n_out() < 3) throw Error(Errc::invalid_argument, "need at least three output times");
  MeanEquationReport rep;
  rep.pass = true;
  const std::size_t d = m.dim();
  for (std::size_t j = 1; j + 1 < est.n_out(); ++j) {
    const double span = est.times[j + 1] - est.times[j - 1];
    Operator fd = (est.eta[j + 1].op() - est.eta[j - 1].op()) * Complex(1.0 / span);
    const Operator R = fd - mean_equation_rhs(m, est, j);
    const Operator& se = est.fd_residual_stderr[j];
    MeanEquationPoint p;
    p.t = est.times[j];
    p.residual = R.max_abs();
    p.worst_margin = -1e300;
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) {
        const double bre = 3.0 * se(a, b).real() + c_fd * est.dt();
        const double bim = 3.0 * se(a, b).imag() + c_fd * est.dt();
        p.worst_margin = std::max({p.worst_margin, std::abs(R(a, b).real()) - bre, std::abs(R(a, b).imag()) - bim});
        p.worst_ratio = std::max({p.worst_ratio, std::abs(R(a, b).real()) / bre, std::abs(R(a, b).imag()) / bim});
        p.max_stderr = std::max({p.max_stderr, se(a, b).real(), se(a, b).imag()});
      }
    p.pass = p.worst_margin <= 0.0;
    rep.pass = rep.pass && p.pass;
    rep.max_residual = std::max(rep.max_residual, p.residual);
    rep.points.push_back(p);
  }
  return rep;
}

}  // namespace ouqt
