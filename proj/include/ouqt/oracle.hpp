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

// Deterministic reference solutions: Liouvillian-exponential propagation for
// constant-coefficient generators and the closed-form coloured dephasing law.

#include <cmath>
#include <cstddef>
#include <utility>

#include "ouqt/error.hpp"
#include "ouqt/linalg.hpp"
#include "ouqt/model.hpp"
#include "ouqt/noise.hpp"

namespace ouqt {

// vec stacks columns: vec(rho)[i + j d] = rho(i, j), so vec(A rho C) = (C^T (x) A) vec(rho).
inline StateVector vec(const Operator& rho) {
  const std::size_t d = rho.dim();
  StateVector v(d * d);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t i = 0; i < d; ++i) v[i + j * d] = rho(i, j);
  return v;
}

inline Operator unvec(const StateVector& v, std::size_t d) {
  if (v.dim() != d * d) throw Error(Errc::dimension_mismatch, "unvec: length is not d^2");
  Operator rho(d);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t i = 0; i < d; ++i) rho(i, j) = v[i + j * d];
  return rho;
}

class Liouvillian {
 public:
  Liouvillian(std::size_t dim, Operator matrix) : dim_(dim), m_(std::move(matrix)) {}

  std::size_t dim() const noexcept { return dim_; }
  const Operator& matrix() const noexcept { return m_; }

  Operator apply(const Operator& rho) const { return unvec(m_ * vec(rho), dim_); }

 private:
  std::size_t dim_;
  Operator m_;
};

// M vec(rho) = vec(-i[H, rho] - 1/2 {B^dagger B, rho} + B rho B^dagger).
inline Liouvillian build_liouvillian(const Operator& H, const Operator& B) {
  if (H.dim() != B.dim() || H.dim() == 0) throw Error(Errc::dimension_mismatch, "H and B must share a dimension");
  if (!is_hermitian(H)) throw Error(Errc::not_hermitian, "Liouvillian Hamiltonian H is not Hermitian");
  const std::size_t d = H.dim();
  const Operator id = Operator::identity(d);
  const Operator BdB = B.adjoint() * B;
  Operator conj_b(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) conj_b(i, j) = std::conj(B(i, j));

  Operator m = Complex(0.0, -1.0) * kron(id, H);
  m.add_scaled(kI, kron(H.transpose(), id));
  m.add_scaled(-0.5, kron(id, BdB));
  m.add_scaled(-0.5, kron(BdB.transpose(), id));
  m += kron(conj_b, B);
  return Liouvillian(d, std::move(m));
}

// A model whose operators do not depend on x has a closed Markovian mean equation.
inline bool has_closed_mean_equation(const ModelSpec& m) {
  const auto& hc = m.hamiltonian().coefficients();
  const auto& bc = m.noise_operator().coefficients();
  for (std::size_t k = 1; k < hc.size(); ++k)
    if (hc[k].max_abs() != 0.0) return false;
  for (std::size_t k = 1; k < bc.size(); ++k)
    if (bc[k].max_abs() != 0.0) return false;
  return true;
}

inline Liouvillian build_liouvillian(const ModelSpec& m) {
  if (!has_closed_mean_equation(m))
    throw Error(Errc::wrong_mode, "model operators depend on x; the mean equation is not closed");
  return build_liouvillian(m.hamiltonian().coefficients().front(), m.noise_operator().coefficients().front());
}

// unvec(exp(t M) vec(rho0))
inline DensityMatrix propagate_lindblad(const Liouvillian& L, const DensityMatrix& rho0, double t) {
  if (!(t >= 0.0)) throw Error(Errc::invalid_argument, "propagate_lindblad: negative time");
  if (rho0.dim() != L.dim()) throw Error(Errc::dimension_mismatch, "propagate_lindblad: dimension mismatch");
  const Operator prop = matrix_exp(Complex(t) * L.matrix());
  return DensityMatrix(unvec(prop * vec(rho0.op()), L.dim()));
}

// Coherence factor E[exp(-2i X_t)] = exp(-2 Var X_t) of the dephasing model
// K = sigma_z, H = 0, whose pathwise solution is exp(-i X_t sigma_z) psi0.
inline double dephasing_coherence(double t, double gamma) {
  if (t < 0.0) throw Error(Errc::invalid_argument, "dephasing_coherence: negative time");
  return std::exp(-2.0 * ou_variance(t, gamma));
}

}  // namespace ouqt
