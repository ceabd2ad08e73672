// Copyright 2026 The qsalab Authors
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


#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

namespace qsalab {
namespace {

using testing::load;

// Independent gap oracle: eigenvalues of diag(sqrt pi) P diag(1/sqrt pi), symmetrized.
double oracle_gap(const Eigen::MatrixXd& P, const std::vector<double>& pi) {
  const auto n = P.rows();
  Eigen::MatrixXd S(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      S(i, j) = std::sqrt(pi[static_cast<std::size_t>(i)]) * P(i, j) / std::sqrt(pi[static_cast<std::size_t>(j)]);
  S = 0.5 * (S + S.transpose());
  Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues().cwiseAbs();
  std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
  return 1.0 - ev(1);
}

TEST(BuildChain, RowsSumToOneEntriesNonnegative) {
  for (const auto& name : testing::bundled_names()) {
    const ProblemInstance inst = load(name);
    for (double b : {0.0, 0.7, 2.0}) {
      const TransitionMatrix c = build_chain(inst, Beta(b));
      EXPECT_LE((c.probs.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12) << name;
      EXPECT_GE(c.probs.minCoeff(), 0.0) << name;
      // Laziness: at least half the mass stays put.
      EXPECT_GE(c.probs.diagonal().minCoeff(), 0.5 - 1e-15) << name;
    }
  }
}

TEST(BuildChain, DetailedBalanceAndStationarity) {
  for (const auto& name : testing::bundled_names()) {
    const ProblemInstance inst = load(name);
    for (double b : {0.0, 0.5, 1.3}) {
      const TransitionMatrix c = build_chain(inst, Beta(b));
      EXPECT_LT(detailed_balance_residual(c.probs, c.stationary.probs), 1e-12) << name;
      const Eigen::Map<const Eigen::RowVectorXd> pi(c.stationary.probs.data(),
                                                    static_cast<Eigen::Index>(c.stationary.probs.size()));
      EXPECT_LT((pi * c.probs - pi).lpNorm<1>(), 1e-10) << name;
    }
  }
}

TEST(BuildChain, BetaZeroStationaryIsUniform) {
  const TransitionMatrix c = build_chain(load("p4_coloring"), Beta(0.0));
  for (double p : c.stationary.probs) EXPECT_NEAR(p, 1.0 / 81.0, 1e-15);
}

TEST(BuildChain, RejectsInfiniteBeta) {
  EXPECT_THROW(build_chain(load("k3_coloring"), Beta::infinity()), DomainError);
}

TEST(SpectralGap, TriangleColoringFrozenValues) {
  // Frozen from a dense eigensolve of the symmetrized 27x27 chain.
  EXPECT_NEAR(build_chain(load("k3_coloring"), Beta(0.0)).gap, 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(build_chain(load("k3_coloring"), Beta(1.0)).gap, 0.08007517955024024, 1e-10);
}

TEST(SpectralGap, IsingCycleFrozenValues) {
  EXPECT_NEAR(build_chain(load("ising4_cycle"), Beta(0.0)).gap, 0.25, 1e-12);
  EXPECT_NEAR(build_chain(load("ising4_cycle"), Beta(1.0)).gap, 0.0433979298541719, 1e-10);
  EXPECT_NEAR(build_chain(load("ising4_cycle"), Beta(1.3)).gap, 0.02424352724863077, 1e-10);
}

TEST(SpectralGap, CoinChainFrozenValues) {
  EXPECT_NEAR(build_chain(load("coin16_n10"), Beta(0.0)).gap, 0.009607359798384785, 1e-10);
  EXPECT_NEAR(build_chain(load("coin16_n10"), Beta(1.0)).gap, 0.04369089759504674, 1e-10);
}

TEST(SpectralGap, AgreesWithIndependentEigensolve) {
  for (const auto& name : testing::bundled_names()) {
    const ProblemInstance inst = load(name);
    for (double b : {0.0, 0.5, 1.0}) {
      const TransitionMatrix c = build_chain(inst, Beta(b));
      if (c.size() == 1) continue;
      EXPECT_NEAR(c.gap, oracle_gap(c.probs, c.stationary.probs), 1e-10) << name;
      EXPECT_GT(c.gap, 0.0);
      EXPECT_LE(c.gap, 1.0);
    }
  }
}

TEST(SpectralGap, TwoStateExamples) {
  Eigen::MatrixXd P(2, 2);
  P << 0.5, 0.5, 0.5, 0.5;
  EXPECT_NEAR(spectral_gap(chain_from_matrix(P, {0.5, 0.5})), 1.0, 1e-15);
  P << 0.75, 0.25, 0.25, 0.75;
  EXPECT_NEAR(spectral_gap(chain_from_matrix(P, {0.5, 0.5})), 0.5, 1e-15);
}

TEST(SpectralGap, NonReversibleChainIsRejected) {
  Eigen::MatrixXd P(3, 3);
  P << 0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.5, 0.0, 0.5;
  EXPECT_THROW(chain_from_matrix(P, {1.0 / 3, 1.0 / 3, 1.0 / 3}), ContractViolation);
}

TEST(Discriminant, TopEigenvectorIsSqrtPi) {
  const TransitionMatrix c = build_chain(load("ising4_cycle"), Beta(0.8));
  EXPECT_NEAR(c.discriminant_eigenvalues(0), 1.0, 1e-12);
  for (std::size_t x = 0; x < c.size(); ++x)
    EXPECT_NEAR(c.discriminant_eigenvectors(static_cast<Eigen::Index>(x), 0), std::sqrt(c.stationary.probs[x]),
                1e-10);
  for (Eigen::Index j = 1; j < c.discriminant_eigenvalues.size(); ++j) {
    EXPECT_LE(c.discriminant_eigenvalues(j), c.discriminant_eigenvalues(j - 1) + 1e-15);
    EXPECT_GE(c.discriminant_eigenvalues(j), -1.0 - 1e-12);
  }
}

TEST(ClassicalMix, IdentityAtZeroAndFixedPointAtPi) {
  const TransitionMatrix c = build_chain(load("k3_coloring"), Beta(1.0));
  std::vector<double> nu(c.size(), 0.0);
  nu[3] = 1.0;
  EXPECT_EQ(classical_mix(c, nu, 0), nu);
  const auto pi_t = classical_mix(c, c.stationary.probs, 25);
  for (std::size_t x = 0; x < c.size(); ++x) EXPECT_NEAR(pi_t[x], c.stationary.probs[x], 1e-14);
}

TEST(ClassicalMix, WarmStartInequalityOnIsingCycle) {
  const TransitionMatrix c = build_chain(load("ising4_cycle"), Beta(1.0));
  Rng rng(5);
  for (int r = 0; r < 20; ++r) {
    std::vector<double> nu(c.size());
    double s = 0.0;
    for (auto& x : nu) s += (x = rng.uniform());
    for (auto& x : nu) x /= s;
    for (const auto& row : warm_start_check(c, nu, {1, 5, 25})) EXPECT_TRUE(row.holds) << row.tv << " " << row.bound;
  }
}

TEST(Diagnostics, MatrixOmittedAboveThreshold) {
  const TransitionMatrix c = build_chain(load("k3_coloring"), Beta(1.0));
  EXPECT_TRUE(chain_diagnostics(c, 64).contains("matrix"));
  EXPECT_FALSE(chain_diagnostics(c, 10).contains("matrix"));
  EXPECT_NEAR(chain_diagnostics(c).at("gap").get<double>(), c.gap, 0.0);
}

}  // namespace
}  // namespace qsalab
