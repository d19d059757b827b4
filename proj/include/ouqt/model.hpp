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

// Dynamics models whose Hamiltonian H(x) and noise operator B(x) are polynomials
// in the current Ornstein-Uhlenbeck value x. The drift of the linear equation is
// derived from (H, B) so that E_Q ||psi_t||^2 stays 1:
//   drift(x) = A(x) - gamma x B(x) = -i H(x) - 1/2 B(x)^dagger B(x).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ouqt/error.hpp"
#include "ouqt/linalg.hpp"

namespace ouqt {

class OperatorPolynomial {
 public:
  static constexpr std::size_t kMaxDegree = 2;

  OperatorPolynomial() = default;
  explicit OperatorPolynomial(std::vector<Operator> coefficients) : coef_(std::move(coefficients)) {
    if (coef_.empty()) throw Error(Errc::invalid_argument, "operator polynomial needs at least one coefficient");
    if (coef_.size() > kMaxDegree + 1)
      throw Error(Errc::invalid_argument,
                  "operator polynomial degree " + std::to_string(coef_.size() - 1) + " exceeds " +
                      std::to_string(kMaxDegree));
    for (std::size_t k = 0; k < coef_.size(); ++k) {
      if (coef_[k].dim() != coef_[0].dim() || coef_[k].dim() == 0)
        throw Error(Errc::dimension_mismatch, "coefficients[" + std::to_string(k) + "] has inconsistent dimension");
      if (!coef_[k].all_finite())
        throw Error(Errc::non_finite, "coefficients[" + std::to_string(k) + "] has non-finite entries");
    }
  }

  static OperatorPolynomial constant(Operator c) { return OperatorPolynomial(std::vector<Operator>{std::move(c)}); }

  std::size_t dim() const { return coef_.empty() ? 0 : coef_[0].dim(); }
  std::size_t degree() const { return coef_.empty() ? 0 : coef_.size() - 1; }
  const std::vector<Operator>& coefficients() const noexcept { return coef_; }

  Operator operator()(double x) const {
    Operator r = coef_.back();
    for (std::size_t k = coef_.size() - 1; k-- > 0;) {
      r *= x;
      r += coef_[k];
    }
    return r;
  }

  // p(x) v without forming p(x).
  StateVector apply(double x, const StateVector& v) const {
    StateVector r = coef_.back() * v;
    for (std::size_t k = coef_.size() - 1; k-- > 0;) {
      r *= x;
      r += coef_[k] * v;
    }
    return r;
  }

 private:
  std::vector<Operator> coef_;
};

enum class ModelKind { random_hamiltonian, measurement };

inline const char* to_string(ModelKind kind) {
  return kind == ModelKind::random_hamiltonian ? "random_hamiltonian" : "measurement";
}

class ModelSpec {
 public:
  std::size_t dim() const { return h_.dim(); }
  double gamma() const noexcept { return gamma_; }
  ModelKind kind() const noexcept { return kind_; }
  const OperatorPolynomial& hamiltonian() const noexcept { return h_; }
  const OperatorPolynomial& noise_operator() const noexcept { return b_; }

  // K of B = -iK; only defined for random-Hamiltonian models.
  const Operator& coupling() const {
    if (!k_) throw Error(Errc::wrong_mode, "coupling operator K exists only for random_hamiltonian models");
    return *k_;
  }
  // The x-independent part H of H(x) = H - gamma x K.
  const Operator& static_hamiltonian() const { return h_.coefficients().front(); }

  bool depends_on_x() const { return h_.degree() > 0 || b_.degree() > 0; }

  Operator drift_operator(double x) const {
    Operator r = drift_.back();
    for (std::size_t k = drift_.size() - 1; k-- > 0;) {
      r *= x;
      r += drift_[k];
    }
    return r;
  }
  Operator diffusion_operator(double x) const { return b_(x); }

  StateVector apply_drift(double x, const StateVector& v) const {
    StateVector r = drift_.back() * v;
    for (std::size_t k = drift_.size() - 1; k-- > 0;) {
      r *= x;
      r += drift_[k] * v;
    }
    return r;
  }
  StateVector apply_diffusion(double x, const StateVector& v) const { return b_.apply(x, v); }

  // Test hook: a copy whose drift carries an extra constant term. Breaks the
  // consistency condition on purpose when the perturbation has a Hermitian part.
  ModelSpec with_drift_perturbation(const Operator& delta) const {
    if (delta.dim() != dim()) throw Error(Errc::dimension_mismatch, "drift perturbation dimension mismatch");
    ModelSpec copy = *this;
    copy.drift_.front() += delta;
    return copy;
  }

 private:
  friend ModelSpec make_random_hamiltonian(const Operator&, const Operator&, double);
  friend ModelSpec make_measurement_model(const OperatorPolynomial&, const OperatorPolynomial&, double);

  ModelSpec(OperatorPolynomial h, OperatorPolynomial b, double gamma, ModelKind kind, std::optional<Operator> k)
      : h_(std::move(h)), b_(std::move(b)), gamma_(gamma), kind_(kind), k_(std::move(k)) {
    // drift(x) = sum_k x^k D_k with D_k = -i H_k - 1/2 sum_{a+b=k} B_a^dagger B_b.
    const auto& hc = h_.coefficients();
    const auto& bc = b_.coefficients();
    const std::size_t degree = std::max(hc.size() - 1, 2 * (bc.size() - 1));
    drift_.assign(degree + 1, Operator::zero(dim()));
    for (std::size_t k = 0; k < hc.size(); ++k) drift_[k].add_scaled(-kI, hc[k]);
    for (std::size_t a = 0; a < bc.size(); ++a) {
      const Operator adj = bc[a].adjoint();
      for (std::size_t c = 0; c < bc.size(); ++c) drift_[a + c].add_scaled(-0.5, adj * bc[c]);
    }
  }

  OperatorPolynomial h_;
  OperatorPolynomial b_;
  double gamma_ = 0.0;
  ModelKind kind_ = ModelKind::measurement;
  std::optional<Operator> k_;
  std::vector<Operator> drift_;
};

namespace detail {

inline void check_gamma(double gamma) {
  if (!std::isfinite(gamma) || gamma < 0.0) throw Error(Errc::invalid_argument, "gamma must be finite and non-negative");
}

inline Operator hermitian_part_or_throw(const Operator& a, const std::string& name) {
  if (!a.all_finite()) throw Error(Errc::non_finite, name + " has non-finite entries");
  const double res = hermitian_residual(a);
  if (res > tolerance::herm(a))
    throw Error(Errc::not_hermitian, name + " is not Hermitian (residual " + std::to_string(res) + ")");
  return 0.5 * (a + a.adjoint());
}

}  // namespace detail

// B = -iK, H(x) = H - gamma x K.
inline ModelSpec make_random_hamiltonian(const Operator& H, const Operator& K, double gamma) {
  detail::check_gamma(gamma);
  if (H.dim() != K.dim() || H.dim() == 0) throw Error(Errc::dimension_mismatch, "H and K must share a dimension");
  Operator h = detail::hermitian_part_or_throw(H, "H");
  Operator k = detail::hermitian_part_or_throw(K, "K");
  OperatorPolynomial h_poly(std::vector<Operator>{h, Complex(-gamma) * k});
  OperatorPolynomial b_poly = OperatorPolynomial::constant(Complex(0.0, -1.0) * k);
  return ModelSpec(std::move(h_poly), std::move(b_poly), gamma, ModelKind::random_hamiltonian, std::move(k));
}

inline ModelSpec make_measurement_model(const OperatorPolynomial& H_poly, const OperatorPolynomial& B_poly,
                                        double gamma) {
  detail::check_gamma(gamma);
  if (H_poly.dim() == 0 || H_poly.dim() != B_poly.dim())
    throw Error(Errc::dimension_mismatch, "H and B polynomials must share a dimension");
  std::vector<Operator> hc;
  for (std::size_t k = 0; k < H_poly.coefficients().size(); ++k)
    hc.push_back(detail::hermitian_part_or_throw(H_poly.coefficients()[k], "H.coefficients[" + std::to_string(k) + "]"));
  return ModelSpec(OperatorPolynomial(std::move(hc)), B_poly, gamma, ModelKind::measurement, std::nullopt);
}

inline Operator drift_operator(const ModelSpec& m, double x) { return m.drift_operator(x); }
inline Operator diffusion_operator(const ModelSpec& m, double x) { return m.diffusion_operator(x); }

// max |A^dagger + A - gamma x (B^dagger + B) + B^dagger B| with A(x) reconstructed as drift + gamma x B.
inline double consistency_residual(const ModelSpec& m, double x) {
  const Operator B = m.diffusion_operator(x);
  const Operator Bd = B.adjoint();
  Operator A = m.drift_operator(x);
  A.add_scaled(m.gamma() * x, B);
  Operator r = A.adjoint() + A;
  r.add_scaled(-m.gamma() * x, Bd + B);
  r += Bd * B;
  return r.max_abs();
}

// 1 + max |A(x)|: the scale against which consistency_residual is judged.
inline double consistency_scale(const ModelSpec& m, double x) {
  Operator A = m.drift_operator(x);
  A.add_scaled(m.gamma() * x, m.diffusion_operator(x));
  return 1.0 + A.max_abs();
}

namespace detail {

inline double girsanov_drift_unchecked(const ModelSpec& m, double x, const StateVector& psi) {
  // B + B^dagger = 0 identically for B = -iK.
  if (m.kind() == ModelKind::random_hamiltonian) return 0.0;
  const StateVector b_psi = m.apply_diffusion(x, psi);
  // <psi|(B + B^dagger) psi> = 2 Re <psi|B psi>
  return 2.0 * inner(psi, b_psi).real();
}

}  // namespace detail

// m(t) = <psi|(B^dagger(x) + B(x)) psi> for a unit vector psi.
inline double girsanov_drift(const ModelSpec& m, double x, const StateVector& psi_hat) {
  if (psi_hat.dim() != m.dim()) throw Error(Errc::dimension_mismatch, "girsanov_drift: state dimension mismatch");
  const double n2 = psi_hat.norm_sq();
  if (std::abs(n2 - 1.0) > 1e-9)
    throw Error(Errc::not_normalized, "girsanov_drift needs a unit vector (norm^2 = " + std::to_string(n2) + ")");
  return detail::girsanov_drift_unchecked(m, x, psi_hat);
}

}  // namespace ouqt
