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
#include <numbers>
#include <numeric>

#include "test_util.hpp"

namespace qsalab {
namespace {

// psi with weight a on the marked coordinate 0, spread over the rest.
Eigen::VectorXcd marked_state(double a, std::size_t n) {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(n));
  v(0) = std::sqrt(a);
  for (Eigen::Index i = 1; i < v.size(); ++i) v(i) = std::sqrt((1.0 - a) / static_cast<double>(n - 1));
  return v;
}

std::vector<char> first_marked(std::size_t n) {
  std::vector<char> m(n, 0);
  m[0] = 1;
  return m;
}

GroverOperator marked_grover(double a, std::size_t n = 4, std::uint64_t steps = 0) {
  return GroverOperator(ReflectionOperator::exact(marked_state(a, n), steps),
                        ReflectionOperator::projector(first_marked(n)));
}

TEST(Grover, HalfAmplitudeGivesQuarterTurnPhases) {
  const GroverOperator Q = marked_grover(0.5);
  ASSERT_TRUE(Q.analytic());
  EXPECT_NEAR(Q.theta(), std::numbers::pi / 4, 1e-14);
  ASSERT_EQ(Q.components().size(), 2u);
  EXPECT_NEAR(Q.components()[0].omega, 0.25, 1e-14);
  EXPECT_NEAR(Q.components()[1].omega, 0.75, 1e-14);
  // Eigenvalues e^{+- i pi / 2}.
  for (const auto& c : Q.components()) {
    const cplx lambda = std::exp(cplx(0.0, 2.0 * std::numbers::pi * c.omega));
    EXPECT_LT((Q.apply(c.vector) - lambda * c.vector).norm(), 1e-12);
  }
}

TEST(Grover, PsiIsRecoveredFromItsEigenvectors) {
  for (double a : {0.1, 0.37, 0.8}) {
    const GroverOperator Q = marked_grover(a, 5);
    const cplx i(0.0, 1.0);
    const Eigen::VectorXcd back =
        (std::exp(-i * Q.theta()) * Q.psi_plus() + std::exp(i * Q.theta()) * Q.psi_minus()) / std::sqrt(2.0);
    EXPECT_LT((back - Q.psi()).norm(), 1e-12) << a;
    EXPECT_NEAR(Q.amplitude(), a, 1e-12);
  }
}

TEST(Grover, DensePathAgreesWithPlanePath) {
  Rng rng(21);
  const Eigen::VectorXcd psi = testing::random_unit(3, rng);
  const std::vector<char> mask = {1, 0, 1};
  const ReflectionOperator r = ReflectionOperator::projector(mask);
  const GroverOperator plane(ReflectionOperator::exact(psi), r);
  const Eigen::MatrixXcd proj = psi * psi.adjoint();
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(3, 3);
  const ReflectionOperator dense_psi =
      ReflectionOperator::dense(2.0 * proj - id, proj, id - proj, psi, ReflectionMode::approximate, 1, 1, 0);
  const GroverOperator dense(dense_psi, r, psi);
  ASSERT_TRUE(plane.analytic());
  ASSERT_FALSE(dense.analytic());
  const double a = std::norm(psi(0)) + std::norm(psi(2));
  EXPECT_NEAR(std::pow(std::sin(plane.theta()), 2), a, 1e-12);
  EXPECT_NEAR(std::pow(std::sin(dense.theta()), 2), a, 1e-9);
}

TEST(Grover, RejectsMismatchedSpaces) {
  EXPECT_THROW(GroverOperator(ReflectionOperator::exact(marked_state(0.3, 4)),
                              ReflectionOperator::projector(first_marked(5))),
               DomainError);
}

TEST(PhaseEstimation, ExactPhaseIsDeterministic) {
  const GroverOperator Q = marked_grover(0.5);
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng(s);
    const EstimateResult r = estimate(Q, 4, rng);
    EXPECT_TRUE(r.estimate.y_median == 1 || r.estimate.y_median == 3);
    EXPECT_NEAR(r.estimate.a_hat, 0.5, 1e-15);
  }
}

TEST(PhaseEstimation, OutcomeDistributionIsNormalized) {
  const GroverOperator Q = marked_grover(0.23);
  const PhaseEstimator pe(Q.decompose(Q.psi()), 32);
  const auto p = pe.distribution();
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  EXPECT_THROW(PhaseEstimator(Q.decompose(Q.psi()), 12), DomainError);
}

TEST(PhaseEstimation, DegenerateAmplitudeZero) {
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(3);
  psi(1) = psi(2) = std::sqrt(0.5);
  const GroverOperator Q(ReflectionOperator::exact(psi), ReflectionOperator::projector(first_marked(3)));
  EXPECT_TRUE(Q.degenerate());
  Rng rng(1);
  const EstimateResult r = estimate(Q, 16, rng);
  EXPECT_TRUE(r.estimate.degenerate);
  EXPECT_EQ(r.estimate.a_hat, 0.0);
  EXPECT_LT((r.post_state - psi).norm(), 1e-15);
  const NondestructiveResult nd = nondestructive_estimate(Q, 16, 0.01, rng);
  EXPECT_EQ(nd.estimate.restore_rounds, 1);
  EXPECT_GT(fidelity(nd.state, psi), 1.0 - 1e-12);
}

TEST(Powering, RepetitionCountAndBounds) {
  EXPECT_EQ(powering_repetitions(1e-3), 133);
  EXPECT_EQ(powering_repetitions(0.5), 15);
  EXPECT_THROW(powering_repetitions(0.0), DomainError);
  EXPECT_THROW(powering_repetitions(1.0), DomainError);
  EXPECT_EQ(restoration_round_cap(1e-3), 11);
  EXPECT_NEAR(bhmt_bound(0.5, 64), 2.0 * std::numbers::pi * 0.5 / 64 + std::pow(std::numbers::pi / 64, 2), 1e-15);
  EXPECT_NEAR(bhmt_bound_quadratic(0.5, 64),
              2.0 * std::numbers::pi * 0.25 / 64 + std::pow(std::numbers::pi / 64, 2), 1e-15);
}

TEST(Powering, FailureRateWithinEta) {
  const double a = 0.3, eta = 1e-3;
  const int M = 64, runs = 100000;
  const GroverOperator Q = marked_grover(a);
  Rng rng(2026);
  int failures = 0;
  for (int t = 0; t < runs; ++t) {
    Rng child = rng.split(static_cast<std::uint64_t>(t));
    const EstimateResult r = estimate_powered(Q, M, eta, child);
    if (std::abs(r.estimate.a_hat - a) > bhmt_bound(a, M)) ++failures;
  }
  EXPECT_LE(static_cast<double>(failures) / runs, 1.5e-3);
}

TEST(Powering, SingleRegisterSuccessAboveEightOverPiSquared) {
  for (double a : {0.1, 0.5, 0.9}) {
    const GroverOperator Q = marked_grover(a);
    const PhaseEstimator pe(Q.decompose(Q.psi()), 64);
    const auto p = pe.distribution();
    double ok = 0.0;
    for (int y = 0; y < 64; ++y)
      if (std::abs(std::pow(std::sin(std::numbers::pi * y / 64), 2) - a) <= bhmt_bound(a, 64)) ok += p[static_cast<std::size_t>(y)];
    EXPECT_GE(ok, 8.0 / (std::numbers::pi * std::numbers::pi)) << a;
  }
}

TEST(Restore, RoundsFollowAGeometricLawWithRateOneHalf) {
  const GroverOperator Q = marked_grover(0.3);
  Rng rng(77);
  const int trials = 4000;
  int first = 0;
  double total = 0.0;
  for (int t = 0; t < trials; ++t) {
    Rng child = rng.split(static_cast<std::uint64_t>(t));
    const NondestructiveResult r = nondestructive_estimate(Q, 64, 1e-6, child);
    EXPECT_GT(fidelity(r.state, Q.psi()), 1.0 - 1e-12);
    total += r.estimate.restore_rounds;
    if (r.estimate.restore_rounds == 1) ++first;
  }
  EXPECT_NEAR(total / trials, 2.0, 0.15);
  EXPECT_NEAR(static_cast<double>(first) / trials, 0.5, 0.04);
}

TEST(Restore, GivesUpAfterTheCap) {
  // Start orthogonal to psi inside the Grover plane; with eta = 0.9 the cap is two rounds.
  const GroverOperator Q = marked_grover(0.3);
  const Eigen::VectorXcd perp = Q.psi_plus() - Q.psi().dot(Q.psi_plus()) * Q.psi();
  ASSERT_EQ(restoration_round_cap(0.9), 2);
  int thrown = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng(s);
    try {
      const RestoreResult r = restore(perp, Q, 0.9, rng);
      EXPECT_EQ(r.rounds, 2);
    } catch (const RestorationFailedError&) {
      ++thrown;
    }
  }
  EXPECT_GT(thrown, 0);
  EXPECT_LT(thrown, 50);
}

TEST(Ledger, ChargesScaleWithRegisterSize) {
  const GroverOperator Q = marked_grover(0.3, 4, 5);
  Rng rng(8);
  CostLedger l32, l64;
  estimate_powered(Q, 32, 0.05, rng, &l32);
  estimate_powered(Q, 64, 0.05, rng, &l64);
  const auto q = static_cast<std::uint64_t>(powering_repetitions(0.05));
  EXPECT_EQ(l32.ae_calls, 1u);
  EXPECT_EQ(l32.reflections, 2u * 32u * q);
  EXPECT_EQ(l32.walk_steps, 5u * 32u * q);
  EXPECT_EQ(l64.walk_steps, 2u * l32.walk_steps);
}

TEST(Transcript, CsvHasOneRowPerTrial) {
  std::ostringstream os;
  write_transcript_csv(os, {{1, {3, 4}, 0.2, 0.25, 1.0}, {2, {5}, 0.3, 0.25, 0.99}});
  const std::string s = os.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 3);
  EXPECT_NE(s.find("3;4"), std::string::npos);
}

}  // namespace
}  // namespace qsalab
