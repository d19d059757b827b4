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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ouqt/dynamics.hpp"
#include "ouqt/oracle.hpp"
#include "test_util.hpp"

namespace ouqt {
namespace {

using testing::max_diff;
using testing::random_hermitian;
using testing::random_operator;
using testing::random_unit;
using namespace qubit;

const Operator kZero2 = Operator::zero(2);

TEST(Vec, StacksColumns) {
  const Operator a{{1.0, 2.0}, {3.0, 4.0}};
  const StateVector v = vec(a);
  EXPECT_EQ(v[0], Complex(1.0));
  EXPECT_EQ(v[1], Complex(3.0));
  EXPECT_EQ(v[2], Complex(2.0));
  EXPECT_EQ(unvec(v, 2), a);
}

TEST(BuildLiouvillian, ZeroGenerator) {
  EXPECT_EQ(build_liouvillian(kZero2, kZero2).matrix().max_abs(), 0.0);
  EXPECT_THROW(build_liouvillian(sigma_minus(), kZero2), Error);
}

TEST(BuildLiouvillian, MatchesLindbladApplyOnBasis) {
  std::mt19937_64 rng(40);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 2 + trial % 3;
    const Operator H = random_hermitian(rng, d), B = random_operator(rng, d);
    const Liouvillian L = build_liouvillian(H, B);
    const ModelSpec m = make_measurement_model(OperatorPolynomial::constant(H), OperatorPolynomial::constant(B), 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        Operator e(d);
        e(i, j) = 1.0;
        EXPECT_LE(max_diff(L.apply(e), lindblad_apply(m, 0.0, e)), 1e-12);
      }
  }
}

TEST(BuildLiouvillian, DephasingOnPlusState) {
  const Liouvillian L = build_liouvillian(kZero2, sigma_z());
  const Operator r = L.apply(outer(plus()));
  EXPECT_LT(max_diff(r, Operator{{0.0, -1.0}, {-1.0, 0.0}}), 1e-15);
}

TEST(BuildLiouvillian, TracePreserving) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + trial % 4;
    const Liouvillian L = build_liouvillian(random_hermitian(rng, d), random_operator(rng, d));
    EXPECT_LE(std::abs(L.apply(random_operator(rng, d)).trace()), 1e-12);
  }
}

TEST(PropagateLindblad, Examples) {
  const DensityMatrix rho0 = DensityMatrix::pure(plus());
  const Liouvillian deph = build_liouvillian(kZero2, sigma_z());
  EXPECT_LT(max_diff(propagate_lindblad(deph, rho0, 0.0).op(), rho0.op()), 1e-15);
  const DensityMatrix r = propagate_lindblad(deph, rho0, 0.5);
  EXPECT_NEAR(r(0, 1).real(), 0.18393972058572117, 1e-14);  // 0.5 e^{-1}
  EXPECT_NEAR(r(0, 1).imag(), 0.0, 1e-15);

  const Liouvillian rot = build_liouvillian(Complex(0.5 * 1.3) * sigma_z(), kZero2);
  const DensityMatrix u = propagate_lindblad(rot, rho0, 2.0);
  EXPECT_NEAR(u.purity(), 1.0, 1e-10);
  EXPECT_THROW(propagate_lindblad(rot, rho0, -1.0), Error);
}

TEST(PropagateLindblad, PreservesTraceAndHermiticity) {
  std::mt19937_64 rng(42);
  const Liouvillian L = build_liouvillian(random_hermitian(rng, 3), random_operator(rng, 3));
  const DensityMatrix rho0 = DensityMatrix::pure(random_unit(rng, 3));
  for (double t : {0.0, 0.5, 1.0, 2.5, 5.0, 10.0}) {
    const DensityMatrix r = propagate_lindblad(L, rho0, t);
    EXPECT_NEAR(r.trace(), 1.0, 1e-10);
    EXPECT_LE(hermitian_residual(r.op()), 1e-10);
    EXPECT_GE(min_eigenvalue_hermitian(r.op()), -1e-10);
  }
}

TEST(PropagateLindblad, ModelRouteRequiresClosedEquation) {
  EXPECT_THROW(build_liouvillian(make_random_hamiltonian(kZero2, sigma_z(), 1.0)), Error);
  EXPECT_NO_THROW(build_liouvillian(make_random_hamiltonian(kZero2, sigma_z(), 0.0)));
}

TEST(DephasingCoherence, ClosedForms) {
  EXPECT_EQ(dephasing_coherence(0.0, 1.0), 1.0);
  EXPECT_NEAR(dephasing_coherence(0.5, 0.0), 0.36787944117144233, 1e-15);
  EXPECT_NEAR(dephasing_coherence(1.0, 1.0), 0.42119274782353533, 1e-15);
  EXPECT_THROW(dephasing_coherence(-0.1, 1.0), Error);
}

TEST(DephasingCoherence, AgreesWithLindbladAtGammaZero) {
  const Liouvillian deph = build_liouvillian(kZero2, sigma_z());
  for (double t : {0.1, 0.5, 1.0, 2.0})
    EXPECT_NEAR(2.0 * propagate_lindblad(deph, DensityMatrix::pure(plus()), t)(0, 1).real(), dephasing_coherence(t, 0.0), 1e-13);
}

TEST(DephasingCoherence, ContinuityAndMonotonicity) {
  for (double t : {0.2, 1.0, 3.0}) EXPECT_LT(std::abs(dephasing_coherence(t, 1e-8) - dephasing_coherence(t, 0.0)), 1e-6);
  for (double gamma : {0.0, 0.5, 2.0})
    for (double t = 0.0; t < 3.0; t += 0.25) EXPECT_LT(dephasing_coherence(t + 0.25, gamma), dephasing_coherence(t, gamma));
  for (double t : {0.3, 1.0, 4.0})
    for (double gamma = 0.0; gamma < 3.0; gamma += 0.5)
      EXPECT_GT(dephasing_coherence(t, gamma + 0.5), dephasing_coherence(t, gamma));
}

TEST(DephasingCoherence, MonteCarloCharacteristicFunction) {
  // Direct average of exp(-2i X_1) over OU paths.
  const double gamma = 1.0, dt = 1e-3;
  const std::size_t n = 100'000;
  double re = 0.0, re_sq = 0.0, im = 0.0;
  const SeedPolicy seeds{43};
  for (std::size_t p = 0; p < n; ++p) {
    const NormalStream s(seeds.stream_seed(p));
    double x = 0.0;
    for (std::size_t k = 0; k < 1000; ++k) x = ou_step(x, gamma, 0.0, dt, std::sqrt(dt) * s(k));
    re += std::cos(2.0 * x);
    re_sq += std::cos(2.0 * x) * std::cos(2.0 * x);
    im += -std::sin(2.0 * x);
  }
  const double mean = re / n;
  const double se = std::sqrt((re_sq / n - mean * mean) / n);
  EXPECT_LE(std::abs(mean - dephasing_coherence(1.0, gamma)), 3.0 * se + 5.0 * dt);
  EXPECT_LE(std::abs(im / n), 3.0 * se + 5.0 * dt);
}

}  // namespace
}  // namespace ouqt
