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

// Euler-Maruyama integrators for the linear (reference-measure) and normalized
// (physical-measure) state equations, the linear density-matrix equation and the
// nonlinear stochastic master equation, plus the exact solution for commuting H, K.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ouqt/error.hpp"
#include "ouqt/linalg.hpp"
#include "ouqt/model.hpp"
#include "ouqt/noise.hpp"

namespace ouqt {

enum class Mode { linear, nonlinear, density_linear, sme };
enum class Measure { reference, physical };

inline const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::linear: return "linear";
    case Mode::nonlinear: return "nonlinear";
    case Mode::density_linear: return "density_linear";
    case Mode::sme: return "sme";
  }
  return "unknown";
}

inline Measure measure_of(Mode mode) {
  return (mode == Mode::linear || mode == Mode::density_linear) ? Measure::reference : Measure::physical;
}

inline constexpr std::size_t kMaxStoredSteps = 1'000'000;

struct Trajectory {
  TimeGrid grid;
  std::vector<StateVector> states;
  std::vector<double> weights;  // ||psi_k||^2
  std::vector<double> X;
  std::vector<double> m_record;       // nonlinear mode only, m at the start of each step
  std::vector<double> pre_norm_sq;    // nonlinear mode only, ||psi||^2 before renormalization
  Measure measure = Measure::reference;
};

struct DensityTrajectory {
  TimeGrid grid;
  std::vector<DensityMatrix> matrices;
  std::vector<double> X;
  std::vector<double> m_record;
  Measure measure = Measure::reference;
};

struct NonlinearStep {
  StateVector state;
  double m_value = 0.0;
  double pre_norm_sq = 1.0;
};

namespace detail {

inline void check_state(const StateVector& psi, const ModelSpec& m) {
  if (psi.dim() != m.dim()) throw Error(Errc::dimension_mismatch, "state dimension does not match the model");
}

inline void check_step(double dt) {
  if (!(std::isfinite(dt) && dt > 0.0)) throw Error(Errc::invalid_argument, "dt must be finite and positive");
}

inline void check_unit(double norm_sq, const char* what) {
  if (std::abs(norm_sq - 1.0) > 1e-9)
    throw Error(Errc::not_normalized, std::string(what) + " must be normalized (norm^2 = " + std::to_string(norm_sq) + ")");
}

inline void check_overflow(const StateVector& v) {
  if (!v.all_finite()) throw Error(Errc::overflow, "non-finite state after Euler step");
}

inline void check_overflow(const Operator& a) {
  if (!a.all_finite()) throw Error(Errc::overflow, "non-finite density matrix after Euler step");
}

template <class Fn>
auto at_step(std::size_t k, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), "step " + std::to_string(k) + ": " + e.what());
  }
}

}  // namespace detail

// psi' = psi + drift(x) psi dt + B(x) psi dW
inline StateVector step_linear(const StateVector& psi, double x, double dW, double dt, const ModelSpec& m) {
  detail::check_state(psi, m);
  detail::check_step(dt);
  StateVector next = m.apply_drift(x, psi);
  next *= dt;
  next += dW * m.apply_diffusion(x, psi);
  next += psi;
  detail::check_overflow(next);
  return next;
}

// One step of
//   d psi = [B - m/2] psi dW_hat - [i H + m^2/8 - (m/2) B + 1/2 B^dagger B] psi dt,
// with m = <psi|(B + B^dagger) psi> taken at the start of the step, followed by renormalization.
inline NonlinearStep step_nonlinear(const StateVector& psi_hat, double x, double dW_hat, double dt, const ModelSpec& m) {
  detail::check_state(psi_hat, m);
  detail::check_step(dt);
  detail::check_unit(psi_hat.norm_sq(), "psi_hat");
  const double mval = detail::girsanov_drift_unchecked(m, x, psi_hat);
  const StateVector b_psi = m.apply_diffusion(x, psi_hat);

  // -iH - 1/2 B^dagger B is the model drift.
  StateVector dt_part = m.apply_drift(x, psi_hat);
  if (mval != 0.0) {
    dt_part += (0.5 * mval) * b_psi;
    dt_part += (-0.125 * mval * mval) * psi_hat;
  }
  StateVector noise_part = b_psi;
  if (mval != 0.0) noise_part += (-0.5 * mval) * psi_hat;

  StateVector next = psi_hat;
  next += dt * dt_part;
  next += dW_hat * noise_part;
  detail::check_overflow(next);

  const double n2 = next.norm_sq();
  if (n2 < 1e-12) throw Error(Errc::vanishing_norm, "norm vanished before renormalization");
  next *= 1.0 / std::sqrt(n2);
  return {std::move(next), mval, n2};
}

// L(x)[rho] = -i[H(x), rho] - 1/2 {B^dagger B, rho} + B rho B^dagger
inline Operator lindblad_apply(const ModelSpec& m, double x, const Operator& rho) {
  if (rho.dim() != m.dim()) throw Error(Errc::dimension_mismatch, "lindblad_apply: dimension mismatch");
  const Operator H = m.hamiltonian()(x);
  const Operator B = m.diffusion_operator(x);
  const Operator Bd = B.adjoint();
  Operator r = Complex(0.0, -1.0) * commutator(H, rho);
  r.add_scaled(-0.5, anticommutator(Bd * B, rho));
  r += B * rho * Bd;
  return r;
}

inline Operator lindblad_apply(const ModelSpec& m, double x, const DensityMatrix& rho) {
  return lindblad_apply(m, x, rho.op());
}

// rho' = rho + (-i[H - gamma x K, rho] - 1/2 [K,[K,rho]]) dt - i[K, rho] dW
inline DensityMatrix step_density_linear(const DensityMatrix& rho, double x, double dW, double dt, const ModelSpec& m) {
  if (m.kind() != ModelKind::random_hamiltonian)
    throw Error(Errc::wrong_mode, "step_density_linear needs a random_hamiltonian model");
  if (rho.dim() != m.dim()) throw Error(Errc::dimension_mismatch, "density matrix dimension does not match the model");
  detail::check_step(dt);
  const Operator& K = m.coupling();
  const Operator& r = rho.op();
  const Operator kr = commutator(K, r);
  Operator drift = Complex(0.0, -1.0) * commutator(m.hamiltonian()(x), r);
  drift.add_scaled(-0.5, commutator(K, kr));
  Operator next = r;
  next.add_scaled(dt, drift);
  next.add_scaled(Complex(0.0, -dW), kr);
  detail::check_overflow(next);
  return DensityMatrix(std::move(next));
}

// Tr{(B + B^dagger) rho}
inline double sme_girsanov_drift(const ModelSpec& m, double x, const Operator& rho) {
  if (m.kind() == ModelKind::random_hamiltonian) return 0.0;
  const Operator B = m.diffusion_operator(x);
  return (B * rho).trace().real() * 2.0;
}

// rho' = rho + L(x)[rho] dt + [B rho + rho B^dagger - Tr{(B + B^dagger) rho} rho] dW_hat, then trace renormalization.
inline DensityMatrix step_sme(const DensityMatrix& rho_tilde, double x, double dW_hat, double dt, const ModelSpec& m) {
  if (rho_tilde.dim() != m.dim()) throw Error(Errc::dimension_mismatch, "density matrix dimension does not match the model");
  detail::check_step(dt);
  const double tr = rho_tilde.trace();
  if (std::abs(tr - 1.0) > tolerance::trace)
    throw Error(Errc::not_normalized, "step_sme needs a unit-trace state (trace " + std::to_string(tr) + ")");
  const Operator& r = rho_tilde.op();
  const Operator B = m.diffusion_operator(x);
  const Operator Bd = B.adjoint();
  const double mval = sme_girsanov_drift(m, x, r);

  Operator noise = B * r + r * Bd;
  noise.add_scaled(-mval, r);
  Operator next = r;
  next.add_scaled(dt, lindblad_apply(m, x, r));
  next.add_scaled(dW_hat, noise);
  detail::check_overflow(next);

  const double new_tr = next.trace().real();
  if (new_tr < 1e-12) throw Error(Errc::vanishing_norm, "trace vanished before renormalization");
  next *= 1.0 / new_tr;
  return DensityMatrix(std::move(next));
}

// Streaming cores. visit(k, state, x) is called for k = 0..n_steps; the
// nonlinear variants also pass m_k (the Girsanov drift at step k).

template <class Visit>
void evolve_linear(const StateVector& psi0, const ModelSpec& m, const TimeGrid& grid, std::span<const double> dW,
                   std::span<const double> X, Visit&& visit) {
  StateVector psi = psi0;
  visit(std::size_t{0}, psi, X[0]);
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    psi = detail::at_step(k, [&] { return step_linear(psi, X[k], dW[k], grid.dt(), m); });
    visit(k + 1, psi, X[k + 1]);
  }
}

template <class Visit>
void evolve_nonlinear(const StateVector& psi0, const ModelSpec& m, const TimeGrid& grid, std::span<const double> dW_hat,
                      Visit&& visit) {
  check_ou_stability(m.gamma(), grid.dt());
  StateVector psi = psi0;
  double x = 0.0;
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    NonlinearStep s = detail::at_step(k, [&] { return step_nonlinear(psi, x, dW_hat[k], grid.dt(), m); });
    visit(k, psi, x, s.m_value, s.pre_norm_sq);
    x = ou_step(x, m.gamma(), s.m_value, grid.dt(), dW_hat[k]);
    psi = std::move(s.state);
  }
  visit(grid.n_steps(), psi, x, detail::girsanov_drift_unchecked(m, x, psi), psi.norm_sq());
}

template <class Visit>
void evolve_density_linear(const DensityMatrix& rho0, const ModelSpec& m, const TimeGrid& grid,
                           std::span<const double> dW, std::span<const double> X, Visit&& visit) {
  DensityMatrix rho = rho0;
  visit(std::size_t{0}, rho, X[0]);
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    rho = detail::at_step(k, [&] { return step_density_linear(rho, X[k], dW[k], grid.dt(), m); });
    visit(k + 1, rho, X[k + 1]);
  }
}

template <class Visit>
void evolve_sme(const DensityMatrix& rho0, const ModelSpec& m, const TimeGrid& grid, std::span<const double> dW_hat,
                Visit&& visit) {
  check_ou_stability(m.gamma(), grid.dt());
  DensityMatrix rho = rho0;
  double x = 0.0;
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    const double mval = sme_girsanov_drift(m, x, rho.op());
    DensityMatrix next = detail::at_step(k, [&] { return step_sme(rho, x, dW_hat[k], grid.dt(), m); });
    visit(k, rho, x, mval);
    x = ou_step(x, m.gamma(), mval, grid.dt(), dW_hat[k]);
    rho = std::move(next);
  }
  visit(grid.n_steps(), rho, x, sme_girsanov_drift(m, x, rho.op()));
}

namespace detail {

inline void check_path(const TimeGrid& grid, std::size_t n_dW) {
  if (grid.n_steps() > kMaxStoredSteps)
    throw Error(Errc::invalid_argument, "full-path storage is limited to 1e6 steps per trajectory");
  if (n_dW != grid.n_steps()) throw Error(Errc::dimension_mismatch, "noise increments do not match the grid");
}

inline void check_initial(const StateVector& psi0, const ModelSpec& m) {
  check_state(psi0, m);
  check_unit(psi0.norm_sq(), "initial state");
}

inline void check_initial(const DensityMatrix& rho0, const ModelSpec& m) {
  if (rho0.dim() != m.dim()) throw Error(Errc::dimension_mismatch, "initial density matrix dimension mismatch");
  if (std::abs(rho0.trace() - 1.0) > tolerance::trace) throw Error(Errc::not_normalized, "initial state must have unit trace");
}

}  // namespace detail

// Linear equation under the reference measure Q on a supplied noise path.
inline Trajectory propagate_linear(const StateVector& psi0, const NoisePath& noise, const ModelSpec& m) {
  detail::check_initial(psi0, m);
  detail::check_path(noise.grid, noise.dW.size());
  Trajectory tr{noise.grid, {}, {}, noise.X, {}, {}, Measure::reference};
  tr.states.reserve(noise.grid.n_steps() + 1);
  tr.weights.reserve(noise.grid.n_steps() + 1);
  evolve_linear(psi0, m, noise.grid, noise.dW, noise.X, [&](std::size_t, const StateVector& psi, double) {
    tr.states.push_back(psi);
    tr.weights.push_back(psi.norm_sq());
  });
  return tr;
}

// Normalized equation under the physical measure. X follows
// X[k+1] = X[k] + (-gamma X[k] + m_k) dt + dW_hat[k].
inline Trajectory propagate_nonlinear(const StateVector& psi0, const TimeGrid& grid, std::span<const double> dW_hat,
                                      const ModelSpec& m) {
  detail::check_initial(psi0, m);
  detail::check_path(grid, dW_hat.size());
  Trajectory tr{grid, {}, {}, {}, {}, {}, Measure::physical};
  evolve_nonlinear(psi0, m, grid, dW_hat, [&](std::size_t k, const StateVector& psi, double x, double mval, double n2) {
    tr.states.push_back(psi);
    tr.weights.push_back(psi.norm_sq());
    tr.X.push_back(x);
    if (k < grid.n_steps()) {
      tr.m_record.push_back(mval);
      tr.pre_norm_sq.push_back(n2);
    }
  });
  return tr;
}

inline Trajectory propagate_nonlinear(const StateVector& psi0, const TimeGrid& grid, const NormalStream& stream,
                                      const ModelSpec& m, std::size_t substeps = 1) {
  const auto dW_hat = sample_wiener(grid, stream, substeps);
  return propagate_nonlinear(psi0, grid, dW_hat, m);
}

inline DensityTrajectory propagate_density_linear(const DensityMatrix& rho0, const NoisePath& noise, const ModelSpec& m) {
  detail::check_initial(rho0, m);
  detail::check_path(noise.grid, noise.dW.size());
  DensityTrajectory tr{noise.grid, {}, noise.X, {}, Measure::reference};
  evolve_density_linear(rho0, m, noise.grid, noise.dW, noise.X,
                        [&](std::size_t, const DensityMatrix& rho, double) { tr.matrices.push_back(rho); });
  return tr;
}

inline DensityTrajectory propagate_sme(const DensityMatrix& rho0, const TimeGrid& grid, std::span<const double> dW_hat,
                                       const ModelSpec& m) {
  detail::check_initial(rho0, m);
  detail::check_path(grid, dW_hat.size());
  DensityTrajectory tr{grid, {}, {}, {}, Measure::physical};
  evolve_sme(rho0, m, grid, dW_hat, [&](std::size_t k, const DensityMatrix& rho, double x, double mval) {
    tr.matrices.push_back(rho);
    tr.X.push_back(x);
    if (k < grid.n_steps()) tr.m_record.push_back(mval);
  });
  return tr;
}

inline DensityTrajectory propagate_sme(const DensityMatrix& rho0, const TimeGrid& grid, const NormalStream& stream,
                                       const ModelSpec& m, std::size_t substeps = 1) {
  const auto dW_hat = sample_wiener(grid, stream, substeps);
  return propagate_sme(rho0, grid, dW_hat, m);
}

// For [H, K] = 0 the time-ordered solution collapses to exp(-i(H t + X_t K)) psi0.
inline StateVector exact_commuting_solution(const StateVector& psi0, const Operator& H, const Operator& K, double x_t,
                                            double t) {
  if (H.dim() != K.dim() || H.dim() != psi0.dim())
    throw Error(Errc::dimension_mismatch, "exact_commuting_solution: dimension mismatch");
  if (commutator(H, K).max_abs() > 1e-12) throw Error(Errc::non_commuting, "H and K do not commute");
  Operator gen = Complex(t) * H;
  gen.add_scaled(x_t, K);
  return matrix_exp(Complex(0.0, -1.0) * gen) * psi0;
}

}  // namespace ouqt
