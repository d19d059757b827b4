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

// Dense complex vectors and operators for few-level systems (d <= 64).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ouqt/error.hpp"

namespace ouqt {

using Complex = std::complex<double>;

inline constexpr Complex kI{0.0, 1.0};

inline bool is_finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(std::size_t dim) : amp_(dim) {}
  explicit StateVector(std::vector<Complex> amplitudes) : amp_(std::move(amplitudes)) {}
  StateVector(std::initializer_list<Complex> amplitudes) : amp_(amplitudes) {}

  static StateVector basis(std::size_t dim, std::size_t k) {
    StateVector v(dim);
    v.amp_.at(k) = 1.0;
    return v;
  }

  std::size_t dim() const noexcept { return amp_.size(); }
  Complex& operator[](std::size_t i) { return amp_[i]; }
  const Complex& operator[](std::size_t i) const { return amp_[i]; }
  std::span<const Complex> amplitudes() const noexcept { return amp_; }
  std::span<Complex> amplitudes() noexcept { return amp_; }

  double norm_sq() const {
    double s = 0.0;
    for (const auto& a : amp_) s += std::norm(a);
    return s;
  }
  double norm() const { return std::sqrt(norm_sq()); }

  bool all_finite() const {
    return std::all_of(amp_.begin(), amp_.end(), [](Complex z) { return is_finite(z); });
  }

  StateVector normalized() const {
    const double n = norm();
    if (!(n > 0.0)) throw Error(Errc::vanishing_norm, "cannot normalize a zero vector");
    StateVector r = *this;
    r *= 1.0 / n;
    return r;
  }

  StateVector& operator+=(const StateVector& o) {
    check_same(o);
    for (std::size_t i = 0; i < amp_.size(); ++i) amp_[i] += o.amp_[i];
    return *this;
  }
  StateVector& operator-=(const StateVector& o) {
    check_same(o);
    for (std::size_t i = 0; i < amp_.size(); ++i) amp_[i] -= o.amp_[i];
    return *this;
  }
  StateVector& operator*=(Complex s) {
    for (auto& a : amp_) a *= s;
    return *this;
  }

  friend StateVector operator+(StateVector a, const StateVector& b) { return a += b; }
  friend StateVector operator-(StateVector a, const StateVector& b) { return a -= b; }
  friend StateVector operator*(Complex s, StateVector a) { return a *= s; }
  friend StateVector operator*(StateVector a, Complex s) { return a *= s; }

 private:
  void check_same(const StateVector& o) const {
    if (o.dim() != dim()) throw Error(Errc::dimension_mismatch, "state vectors differ in dimension");
  }

  std::vector<Complex> amp_;
};

// <a|b>
inline Complex inner(const StateVector& a, const StateVector& b) {
  if (a.dim() != b.dim()) throw Error(Errc::dimension_mismatch, "inner product of unequal dimensions");
  Complex s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

// Square matrix, row-major.
class Operator {
 public:
  Operator() = default;
  explicit Operator(std::size_t dim) : dim_(dim), e_(dim * dim) {}
  Operator(std::initializer_list<std::initializer_list<Complex>> rows) : dim_(rows.size()) {
    e_.reserve(dim_ * dim_);
    for (const auto& row : rows) {
      if (row.size() != dim_) throw Error(Errc::dimension_mismatch, "operator rows must form a square grid");
      e_.insert(e_.end(), row.begin(), row.end());
    }
  }

  static Operator zero(std::size_t dim) { return Operator(dim); }
  static Operator identity(std::size_t dim) {
    Operator r(dim);
    for (std::size_t i = 0; i < dim; ++i) r(i, i) = 1.0;
    return r;
  }
  static Operator diagonal(std::span<const Complex> d) {
    Operator r(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) r(i, i) = d[i];
    return r;
  }

  std::size_t dim() const noexcept { return dim_; }
  Complex& operator()(std::size_t i, std::size_t j) { return e_[i * dim_ + j]; }
  const Complex& operator()(std::size_t i, std::size_t j) const { return e_[i * dim_ + j]; }
  std::span<const Complex> data() const noexcept { return e_; }

  Operator adjoint() const {
    Operator r(dim_);
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j) r(j, i) = std::conj((*this)(i, j));
    return r;
  }
  Operator transpose() const {
    Operator r(dim_);
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j) r(j, i) = (*this)(i, j);
    return r;
  }

  Complex trace() const {
    Complex s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s += (*this)(i, i);
    return s;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& z : e_) m = std::max(m, std::abs(z));
    return m;
  }

  // Induced 1-norm (max column sum).
  double norm1() const {
    double m = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < dim_; ++i) s += std::abs((*this)(i, j));
      m = std::max(m, s);
    }
    return m;
  }

  bool all_finite() const {
    return std::all_of(e_.begin(), e_.end(), [](Complex z) { return is_finite(z); });
  }

  Operator& operator+=(const Operator& o) {
    check_same(o);
    for (std::size_t k = 0; k < e_.size(); ++k) e_[k] += o.e_[k];
    return *this;
  }
  Operator& operator-=(const Operator& o) {
    check_same(o);
    for (std::size_t k = 0; k < e_.size(); ++k) e_[k] -= o.e_[k];
    return *this;
  }
  Operator& operator*=(Complex s) {
    for (auto& z : e_) z *= s;
    return *this;
  }
  // this += s * o
  Operator& add_scaled(Complex s, const Operator& o) {
    check_same(o);
    for (std::size_t k = 0; k < e_.size(); ++k) e_[k] += s * o.e_[k];
    return *this;
  }

  friend Operator operator+(Operator a, const Operator& b) { return a += b; }
  friend Operator operator-(Operator a, const Operator& b) { return a -= b; }
  friend Operator operator-(Operator a) { return a *= -1.0; }
  friend Operator operator*(Complex s, Operator a) { return a *= s; }
  friend Operator operator*(Operator a, Complex s) { return a *= s; }

  friend Operator operator*(const Operator& a, const Operator& b) {
    a.check_same(b);
    const std::size_t d = a.dim_;
    Operator r(d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t k = 0; k < d; ++k) {
        const Complex aik = a(i, k);
        if (aik == Complex(0.0)) continue;
        for (std::size_t j = 0; j < d; ++j) r(i, j) += aik * b(k, j);
      }
    return r;
  }

  friend StateVector operator*(const Operator& a, const StateVector& v) {
    if (a.dim_ != v.dim()) throw Error(Errc::dimension_mismatch, "operator/vector dimension mismatch");
    StateVector r(a.dim_);
    for (std::size_t i = 0; i < a.dim_; ++i) {
      Complex s = 0.0;
      for (std::size_t j = 0; j < a.dim_; ++j) s += a(i, j) * v[j];
      r[i] = s;
    }
    return r;
  }

  friend bool operator==(const Operator& a, const Operator& b) { return a.dim_ == b.dim_ && a.e_ == b.e_; }

 private:
  void check_same(const Operator& o) const {
    if (o.dim_ != dim_) throw Error(Errc::dimension_mismatch, "operators differ in dimension");
  }

  std::size_t dim_ = 0;
  std::vector<Complex> e_;
};

namespace tolerance {

inline double herm(const Operator& a) { return 1e-10 * (1.0 + a.max_abs()); }
inline constexpr double trace = 1e-9;
inline constexpr double psd = 1e-8;

}  // namespace tolerance

inline Operator commutator(const Operator& a, const Operator& b) {
  if (a.dim() != b.dim()) throw Error(Errc::dimension_mismatch, "commutator of unequal dimensions");
  return a * b - b * a;
}

inline Operator anticommutator(const Operator& a, const Operator& b) {
  if (a.dim() != b.dim()) throw Error(Errc::dimension_mismatch, "anticommutator of unequal dimensions");
  return a * b + b * a;
}

// <v|a v>
inline Complex expectation(const Operator& a, const StateVector& v) {
  if (a.dim() != v.dim()) throw Error(Errc::dimension_mismatch, "expectation: operator/vector mismatch");
  return inner(v, a * v);
}

// |v><v|
inline Operator outer(const StateVector& v) {
  const std::size_t d = v.dim();
  Operator r(d);
  for (std::size_t i = 0; i < d; ++i) {
    r(i, i) = std::norm(v[i]);
    for (std::size_t j = i + 1; j < d; ++j) {
      r(i, j) = v[i] * std::conj(v[j]);
      r(j, i) = std::conj(r(i, j));
    }
  }
  return r;
}

// max |a - a^dagger|
inline double hermitian_residual(const Operator& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = i; j < a.dim(); ++j) m = std::max(m, std::abs(a(i, j) - std::conj(a(j, i))));
  return m;
}

inline bool is_hermitian(const Operator& a) { return hermitian_residual(a) <= tolerance::herm(a); }

// Kronecker product a (x) b.
inline Operator kron(const Operator& a, const Operator& b) {
  const std::size_t da = a.dim(), db = b.dim();
  Operator r(da * db);
  for (std::size_t i = 0; i < da; ++i)
    for (std::size_t j = 0; j < da; ++j)
      for (std::size_t k = 0; k < db; ++k)
        for (std::size_t l = 0; l < db; ++l) r(i * db + k, j * db + l) = a(i, j) * b(k, l);
  return r;
}

// Scaling and squaring down to ||a / 2^s||_1 <= 0.5, then a degree-20 Taylor core.
inline Operator matrix_exp(const Operator& a) {
  if (!a.all_finite()) throw Error(Errc::non_finite, "matrix_exp: non-finite input");
  const std::size_t d = a.dim();
  const double n1 = a.norm1();
  int squarings = 0;
  if (n1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(n1 / 0.5)));
  Operator scaled = a * Complex(std::ldexp(1.0, -squarings));

  constexpr int kDegree = 20;
  // Horner: I + A(I + A/2(I + A/3(...)))
  Operator result = Operator::identity(d);
  for (int k = kDegree; k >= 1; --k) {
    result = scaled * result;
    result *= 1.0 / k;
    for (std::size_t i = 0; i < d; ++i) result(i, i) += 1.0;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

// Smallest eigenvalue of the Hermitian part of a.
inline double min_eigenvalue_hermitian(const Operator& a) {
  const auto d = static_cast<Eigen::Index>(a.dim());
  Eigen::MatrixXcd m(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      m(i, j) = 0.5 * (a(i, j) + std::conj(a(j, i)));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

// Hermitian, trace-real, positive semidefinite (within the scaled tolerances); optionally unit trace.
class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(Operator op) : op_(std::move(op)) {
    if (!op_.all_finite()) throw Error(Errc::non_finite, "density matrix has non-finite entries");
    const double res = hermitian_residual(op_);
    if (res > tolerance::herm(op_))
      throw Error(Errc::not_hermitian, "density matrix not Hermitian (residual " + std::to_string(res) + ")");
  }

  static DensityMatrix pure(const StateVector& v) { return DensityMatrix(outer(v)); }

  const Operator& op() const noexcept { return op_; }
  std::size_t dim() const noexcept { return op_.dim(); }
  const Complex& operator()(std::size_t i, std::size_t j) const { return op_(i, j); }
  double trace() const { return op_.trace().real(); }

  double purity() const { return (op_ * op_).trace().real(); }

 private:
  Operator op_;
};

// Full state check: Hermitian, real trace, PSD and (if requested) unit trace.
inline bool satisfies_density_invariants(const Operator& a, bool unit_trace) {
  if (!a.all_finite()) return false;
  const double th = tolerance::herm(a);
  if (hermitian_residual(a) > th) return false;
  const Complex tr = a.trace();
  if (std::abs(tr.imag()) > th) return false;
  if (unit_trace && std::abs(tr.real() - 1.0) > tolerance::trace) return false;
  return min_eigenvalue_hermitian(a) >= -tolerance::psd;
}

// Qubit helpers; |0> is the first basis vector.
namespace qubit {

inline Operator sigma_x() { return {{0.0, 1.0}, {1.0, 0.0}}; }
inline Operator sigma_y() { return {{0.0, -kI}, {kI, 0.0}}; }
inline Operator sigma_z() { return {{1.0, 0.0}, {0.0, -1.0}}; }
// sigma_- |1> = |0>
inline Operator sigma_minus() { return {{0.0, 1.0}, {0.0, 0.0}}; }
inline StateVector ket0() { return {1.0, 0.0}; }
inline StateVector ket1() { return {0.0, 1.0}; }
inline StateVector plus() {
  const double s = 1.0 / std::sqrt(2.0);
  return {s, s};
}

}  // namespace qubit

}  // namespace ouqt
