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

// Wiener increments and the Ornstein-Uhlenbeck path dX = -gamma X dt + dW on a
// fixed grid, with reproducible counter-based Gaussian draws.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ouqt/error.hpp"
#include "ouqt/parallel.hpp"

namespace ouqt {

class TimeGrid {
 public:
  TimeGrid(double dt, std::size_t n_steps) : dt_(dt), n_steps_(n_steps) {
    if (!(std::isfinite(dt) && dt > 0.0)) throw Error(Errc::invalid_argument, "time step must be finite and positive");
    if (n_steps == 0) throw Error(Errc::invalid_argument, "grid needs at least one step");
  }

  // Grid with n_steps = T/dt; T must be an integer multiple of dt (relative 1e-9).
  static TimeGrid from_horizon(double dt, double horizon) {
    if (!(std::isfinite(dt) && dt > 0.0)) throw Error(Errc::invalid_argument, "time step must be finite and positive");
    if (!(std::isfinite(horizon) && horizon > 0.0)) throw Error(Errc::invalid_argument, "horizon must be finite and positive");
    const double steps = std::round(horizon / dt);
    if (steps < 1.0 || std::abs(steps * dt - horizon) > 1e-9 * horizon)
      throw Error(Errc::invalid_argument, "horizon is not an integer multiple of dt");
    return TimeGrid(dt, static_cast<std::size_t>(steps));
  }

  double dt() const noexcept { return dt_; }
  std::size_t n_steps() const noexcept { return n_steps_; }
  double horizon() const noexcept { return dt_ * static_cast<double>(n_steps_); }
  double t(std::size_t k) const noexcept { return dt_ * static_cast<double>(k); }

  // Same horizon with dt / factor.
  TimeGrid refined(std::size_t factor) const { return TimeGrid(dt_ / static_cast<double>(factor), n_steps_ * factor); }

 private:
  double dt_;
  std::size_t n_steps_;
};

// splitmix64 finalizer.
inline std::uint64_t avalanche(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

struct SeedPolicy {
  std::uint64_t master_seed = 0;

  // Trajectory index -> stream seed. A bijection in index for a fixed master seed.
  std::uint64_t stream_seed(std::uint64_t index) const {
    return avalanche(avalanche(master_seed) ^ (index * kGolden + 0x632be59bd9b4e019ULL));
  }
};

// Counter-based standard normal stream: draw k is a pure function of (seed, k).
// Pair j = k / 2 hashes two counters into uniforms u1, u2 in (0, 1) using the top
// 53 bits, then Box-Muller gives z0 = r cos(2 pi u2) (even k) and z1 = r sin(2 pi u2) (odd k)
// with r = sqrt(-2 ln u1).
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  double operator()(std::uint64_t k) const {
    const std::uint64_t j = k >> 1;
    const double u1 = to_unit(avalanche(seed_ + kGolden * (2 * j + 1)));
    const double u2 = to_unit(avalanche(seed_ + kGolden * (2 * j + 2)));
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return (k & 1) ? r * std::sin(angle) : r * std::cos(angle);
  }

 private:
  static double to_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t seed_;
};

// Increment k is the sum of `substeps` draws of variance dt/substeps (draws
// k*substeps .. k*substeps+substeps-1). A grid refined by `substeps` with
// substeps=1 therefore samples the same Brownian path at finer resolution.
inline std::vector<double> sample_wiener(const TimeGrid& grid, const NormalStream& stream, std::size_t substeps = 1) {
  if (substeps == 0) throw Error(Errc::invalid_argument, "substeps must be positive");
  const double scale = std::sqrt(grid.dt() / static_cast<double>(substeps));
  std::vector<double> dW(grid.n_steps());
  for (std::size_t k = 0; k < dW.size(); ++k) {
    double s = 0.0;
    for (std::size_t r = 0; r < substeps; ++r) s += stream(k * substeps + r);
    dW[k] = scale * s;
  }
  return dW;
}

// Sums consecutive blocks of `factor` increments.
inline std::vector<double> coarsen(std::span<const double> dW, std::size_t factor) {
  if (factor == 0 || dW.size() % factor != 0)
    throw Error(Errc::invalid_argument, "coarsening factor must divide the number of increments");
  std::vector<double> out(dW.size() / factor);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double s = 0.0;
    for (std::size_t r = 0; r < factor; ++r) s += dW[k * factor + r];
    out[k] = s;
  }
  return out;
}

inline void check_ou_stability(double gamma, double dt) {
  if (!std::isfinite(gamma) || gamma < 0.0)
    throw Error(Errc::invalid_argument, "gamma must be finite and non-negative");
  if (gamma * dt >= 1.0)
    throw Error(Errc::unstable_scheme,
                "gamma*dt = " + std::to_string(gamma * dt) + " >= 1; explicit OU update is unstable");
}

// One Euler step of the OU process under the physical measure; m = 0 gives the reference measure.
inline double ou_step(double x, double gamma, double drift, double dt, double dW) {
  return x + (-gamma * x + drift) * dt + dW;
}

// X[0] = 0, X[k+1] = X[k] - gamma X[k] dt + dW[k].
inline std::vector<double> ou_path(std::span<const double> dW, double gamma, const TimeGrid& grid) {
  if (dW.size() != grid.n_steps()) throw Error(Errc::dimension_mismatch, "ou_path: increments do not match grid");
  check_ou_stability(gamma, grid.dt());
  std::vector<double> X(dW.size() + 1, 0.0);
  for (std::size_t k = 0; k < dW.size(); ++k) X[k + 1] = ou_step(X[k], gamma, 0.0, grid.dt(), dW[k]);
  return X;
}

// X[k+1] = X[k] + (-gamma X[k] + m[k]) dt + dW_hat[k].
inline std::vector<double> ou_path_physical(std::span<const double> dW_hat, std::span<const double> m_values,
                                            double gamma, const TimeGrid& grid) {
  if (dW_hat.size() != grid.n_steps() || m_values.size() != grid.n_steps())
    throw Error(Errc::dimension_mismatch, "ou_path_physical: inputs do not match grid");
  check_ou_stability(gamma, grid.dt());
  std::vector<double> X(dW_hat.size() + 1, 0.0);
  for (std::size_t k = 0; k < dW_hat.size(); ++k)
    X[k + 1] = ou_step(X[k], gamma, m_values[k], grid.dt(), dW_hat[k]);
  return X;
}

// Var(X_t) of the continuous process: (1 - e^{-2 gamma t}) / (2 gamma), or t at gamma = 0.
inline double ou_variance(double t, double gamma) {
  if (t < 0.0) throw Error(Errc::invalid_argument, "negative time");
  if (gamma < 0.0) throw Error(Errc::invalid_argument, "gamma must be non-negative");
  if (gamma == 0.0) return t;
  return -std::expm1(-2.0 * gamma * t) / (2.0 * gamma);
}

// Cov(X_t, X_s) = (e^{-gamma|t-s|} - e^{-gamma(t+s)}) / (2 gamma); min(t, s) at gamma = 0.
inline double ou_covariance(double t, double s, double gamma) {
  if (t < 0.0 || s < 0.0) throw Error(Errc::invalid_argument, "ou_covariance: negative time");
  if (gamma < 0.0) throw Error(Errc::invalid_argument, "gamma must be non-negative");
  return std::exp(-gamma * std::abs(t - s)) * ou_variance(std::min(t, s), gamma);
}

struct NoisePath {
  TimeGrid grid;
  std::vector<double> dW;
  std::vector<double> X;
};

inline NoisePath make_noise_path(const TimeGrid& grid, double gamma, const NormalStream& stream,
                                 std::size_t substeps = 1) {
  auto dW = sample_wiener(grid, stream, substeps);
  auto X = ou_path(dW, gamma, grid);
  return NoisePath{grid, std::move(dW), std::move(X)};
}

inline NoisePath make_noise_path(const TimeGrid& grid, double gamma, std::vector<double> dW) {
  auto X = ou_path(dW, gamma, grid);
  return NoisePath{grid, std::move(dW), std::move(X)};
}

struct CovarianceRow {
  double t = 0.0;
  double s = 0.0;
  double analytic = 0.0;
  double empirical = 0.0;
  double std_error = 0.0;
};

// Sample Cov(X_t, X_s) over n_paths OU paths for every (t, s) pair of grid steps in
// `steps`. The standard error uses the sample variance of the centred products.
inline std::vector<CovarianceRow> empirical_ou_covariance(double gamma, const TimeGrid& grid, std::size_t n_paths,
                                                          const SeedPolicy& seeds, std::span<const std::size_t> steps,
                                                          unsigned threads = 0) {
  if (n_paths < 2) throw Error(Errc::invalid_argument, "need at least two paths");
  check_ou_stability(gamma, grid.dt());
  for (auto k : steps)
    if (k > grid.n_steps()) throw Error(Errc::invalid_argument, "covariance step outside grid");
  const std::size_t m = steps.size();
  std::vector<double> samples(n_paths * m);
  parallel_for(n_paths, threads, [&](std::size_t p) {
    const NormalStream stream(seeds.stream_seed(p));
    const double sdt = std::sqrt(grid.dt());
    double x = 0.0;
    std::size_t k = 0;
    auto record = [&] {
      for (std::size_t j = 0; j < m; ++j)
        if (steps[j] == k) samples[p * m + j] = x;
    };
    record();
    for (; k < grid.n_steps();) {
      x = ou_step(x, gamma, 0.0, grid.dt(), sdt * stream(k));
      ++k;
      record();
    }
  });

  const double n = static_cast<double>(n_paths);
  std::vector<double> mean(m, 0.0);
  for (std::size_t p = 0; p < n_paths; ++p)
    for (std::size_t j = 0; j < m; ++j) mean[j] += samples[p * m + j];
  for (auto& v : mean) v /= n;

  std::vector<CovarianceRow> rows;
  rows.reserve(m * m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      double sum = 0.0, sum_sq = 0.0;
      for (std::size_t p = 0; p < n_paths; ++p) {
        const double prod = (samples[p * m + a] - mean[a]) * (samples[p * m + b] - mean[b]);
        sum += prod;
        sum_sq += prod * prod;
      }
      const double cov = sum / n;
      const double var = std::max(0.0, (sum_sq / n - cov * cov) * n / (n - 1.0));
      const double t = grid.t(steps[a]), s = grid.t(steps[b]);
      rows.push_back({t, s, ou_covariance(t, s, gamma), cov * n / (n - 1.0), std::sqrt(var / n)});
    }
  return rows;
}

}  // namespace ouqt
