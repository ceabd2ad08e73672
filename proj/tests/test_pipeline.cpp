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
#include <sstream>

#include "test_util.hpp"

namespace qsalab {
namespace {

using testing::load;

TEST(RunParams, Validation) {
  RunParams p;
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.mode(), ReflectionMode::exact);
  p.k = 4;
  EXPECT_EQ(p.mode(), ReflectionMode::approximate);
  for (auto bad : {RunParams{.B = 1.0}, RunParams{.p = 1.0}, RunParams{.epsilon = 0.0}, RunParams{.eta = 1.0},
                   RunParams{.M = 12}, RunParams{.k = -1}})
    EXPECT_THROW(bad.validate(), DomainError);
}

TEST(AnnealStep, IdenticalTargetsCostNothing) {
  const Eigen::VectorXcd psi = qsample(gibbs(load("k3_coloring"), Beta(0.4))).amplitudes;
  const ReflectionOperator r = ReflectionOperator::exact(psi);
  Rng rng(1);
  CostLedger ledger;
  const AnnealResult a = anneal_step(psi, r, r, 0.5, 0.01, rng, &ledger);
  EXPECT_EQ(a.rounds, 0);
  EXPECT_EQ(a.state, psi);
  EXPECT_EQ(ledger.reflections, 0u);
}

TEST(AnnealStep, HalfOverlapSucceedsFirstRoundHalfTheTime) {
  Eigen::VectorXcd psi(2), phi(2);
  psi << 1.0, 0.0;
  phi << std::sqrt(0.5), std::sqrt(0.5);
  const ReflectionOperator from = ReflectionOperator::exact(psi), to = ReflectionOperator::exact(phi);
  Rng rng(13);
  const int trials = 20000;
  int first = 0;
  for (int t = 0; t < trials; ++t) {
    const AnnealResult a = anneal_step(psi, from, to, 0.5, 1e-9, rng, nullptr);
    ASSERT_GT(fidelity(a.state, phi), 1.0 - 1e-12);
    if (a.rounds == 1) ++first;
  }
  EXPECT_NEAR(static_cast<double>(first) / trials, 0.5, 0.015);
}

TEST(AnnealStep, OrthogonalTargetsHitTheCap) {
  Eigen::VectorXcd psi(2), phi(2);
  psi << 1.0, 0.0;
  phi << 0.0, 1.0;
  Rng rng(2);
  try {
    anneal_step(psi, ReflectionOperator::exact(psi), ReflectionOperator::exact(phi), 0.25, 0.01, rng, nullptr);
    FAIL() << "expected AnnealFailureError";
  } catch (const AnnealFailureError&) {
  }
  EXPECT_EQ(anneal_round_cap(0.25, 0.01), 4 + static_cast<int>(std::ceil(std::log(100.0) / 0.375)));
}

TEST(RatioEstimate, UnitWeightsAreExact) {
  const ProblemInstance inst = load("k3_coloring");
  QsampleContext ctx(inst, ReflectionMode::exact, 0);
  ErrorBudget budget(0.01, 4);
  Rng rng(3);
  const Eigen::VectorXcd s = qsample(gibbs(inst, Beta(0.5))).amplitudes;
  const RatioOutcome r = estimate_ratio(s, ctx, Beta(0.5), Beta(0.5), 0.05, 0, 32, 1 << 12, budget, rng, nullptr);
  EXPECT_EQ(r.estimate.w_hat, 1.0);
  EXPECT_GT(fidelity(r.state, s), 1.0 - 1e-12);
}

TEST(RatioEstimate, RejectsDownwardSteps) {
  const ProblemInstance inst = load("k3_coloring");
  QsampleContext ctx(inst, ReflectionMode::exact, 0);
  ErrorBudget budget(0.01, 4);
  Rng rng(3);
  const Eigen::VectorXcd s = qsample(gibbs(inst, Beta(0.5))).amplitudes;
  EXPECT_THROW(estimate_ratio(s, ctx, Beta(0.5), Beta(0.2), 0.05, 0, 32, 1 << 12, budget, rng, nullptr), DomainError);
}

TEST(RatioEstimate, TriangleHalfStepWithinRelativeError) {
  const ProblemInstance inst = load("k3_coloring");
  const OracleTable oracle(inst);
  const double truth = oracle.ratio(Beta(0.0), Beta(0.5));
  const Eigen::VectorXcd s = qsample(gibbs(inst, Beta(0.0))).amplitudes;
  int misses = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    QsampleContext ctx(inst, ReflectionMode::exact, 0);
    ErrorBudget budget(0.01, 4);
    Rng rng(seed);
    CostLedger ledger;
    const RatioOutcome r = estimate_ratio(s, ctx, Beta(0.0), Beta(0.5), 0.05, 0, 32, 1 << 14, budget, rng, &ledger);
    if (std::abs(r.estimate.w_hat - truth) > 0.05 * truth) ++misses;
    EXPECT_GT(fidelity(r.state, s), 1.0 - 1e-10);
    EXPECT_EQ(ledger.ae_calls, 2u);  // pilot plus main estimate
  }
  EXPECT_LE(misses, 1);
}

TEST(RatioWeights, InfinityIsTheGroundIndicator) {
  const ProblemInstance inst = load("k3_coloring");
  const auto w = ratio_weights(inst, Beta(1.0), Beta::infinity());
  for (std::size_t x = 0; x < inst.size(); ++x) EXPECT_EQ(w[x], inst.energies[x] == 0.0 ? 1.0 : 0.0);
}

TEST(Counting, ConstantEnergyCountsStatesExactly) {
  const ProblemInstance inst = load("ising1");
  Rng rng(4);
  const CountingResult r = run_counting(inst, {}, rng);
  EXPECT_NEAR(r.z_hat, static_cast<double>(inst.size()), 1e-12);
}

TEST(Counting, TriangleColoringsWithinEpsilonMostly) {
  const ProblemInstance inst = load("k3_coloring");
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const CountingResult r = run_counting(inst, {}, rng);
    if (std::abs(r.z_hat - 6.0) <= 0.1 * 6.0) ++hits;
    EXPECT_TRUE(r.schedule.betas.back().is_infinite());
    EXPECT_EQ(r.report.ratios.size(), r.schedule.length());
  }
  EXPECT_GE(hits, 9);
}

TEST(Counting, DeterministicForAFixedSeed) {
  const ProblemInstance inst = load("p4_coloring");
  Rng a(42), b(42);
  const CountingResult ra = run_counting(inst, {}, a), rb = run_counting(inst, {}, b);
  EXPECT_EQ(ra.z_hat, rb.z_hat);
  EXPECT_EQ(to_json(ra.report).dump(), to_json(rb.report).dump());
}

TEST(Counting, ScheduleTelescopesWithOracleRatios) {
  const ProblemInstance inst = load("p4_coloring");
  const OracleTable oracle(inst);
  Rng rng(8);
  const CountingResult r = run_counting(inst, {}, rng);
  double log_prod = oracle.f(Beta(0.0));
  for (std::size_t i = 0; i + 1 < r.schedule.betas.size(); ++i)
    log_prod += std::log(oracle.ratio(r.schedule.betas[i], r.schedule.betas[i + 1]));
  EXPECT_NEAR(log_prod, oracle.f(Beta::infinity()), 1e-12);
  EXPECT_NEAR(std::exp(oracle.f(Beta::infinity())), 24.0, 1e-9);
}

TEST(Counting, RejectsBayesInstance) {
  Rng rng(1);
  EXPECT_THROW(run_counting(load("coin16_n10"), {}, rng), UnsupportedInstanceError);
  EXPECT_THROW(run_bayesian(load("k3_coloring"), {}, rng), UnsupportedInstanceError);
}

TEST(CountingReverse, TriangleMatchings) {
  const ProblemInstance inst = load("k3_matching");
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const CountingResult r = run_counting_reverse(inst, {}, rng);
    if (std::abs(r.z_hat - 4.0) <= 0.1 * 4.0) ++hits;
    EXPECT_EQ(r.report.mode, "count_reverse");
  }
  EXPECT_GE(hits, 9);
}

TEST(Bayes, PosteriorReachedInExactMode) {
  const ProblemInstance inst = load("coin16_n40");
  const Eigen::VectorXcd target = qsample(gibbs(inst, Beta(1.0))).amplitudes;
  Rng rng(5);
  const BayesResult r = run_bayesian(inst, {}, rng);
  EXPECT_GT(fidelity(r.state, target), 1.0 - 1e-10);
  EXPECT_EQ(r.schedule.betas.back().value(), 1.0);
  EXPECT_GT(r.report.cost.anneal_rounds, 0u);
}

TEST(Bayes, ApproximateReflectionsStayClose) {
  const ProblemInstance inst = load("coin16_n10");
  const Eigen::VectorXcd target = qsample(gibbs(inst, Beta(1.0))).amplitudes;
  Rng rng(6);
  const BayesResult r = run_bayesian(inst, RunParams{.k = 8}, rng);
  EXPECT_GT(fidelity(r.state, target), 0.99);
}

TEST(Bayes, EmptyDataKeepsThePrior) {
  const ProblemInstance inst = load("coin16_empty");
  Rng rng(2);
  const BayesResult r = run_bayesian(inst, {}, rng);
  EXPECT_EQ(r.schedule.length(), 1u);
  EXPECT_GT(fidelity(r.state, qsample(gibbs(inst, Beta(0.0))).amplitudes), 1.0 - 1e-12);
}

TEST(Report, JsonCarriesScheduleRatiosAndCost) {
  const ProblemInstance inst = load("k3_coloring");
  Rng rng(9);
  const CountingResult r = run_counting(inst, {}, rng);
  const json j = to_json(r.report);
  for (const char* key : {"mode", "z_hat", "log_z_hat", "schedule", "ratios", "cost", "seed", "instance_digest"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j.at("schedule").back(), "inf");
  EXPECT_EQ(j.at("ratios").size(), r.report.ratios.size());
  EXPECT_FALSE(j.contains("wall_seconds"));
}

TEST(Report, ScheduleRoundTripsThroughJson) {
  Schedule s;
  s.mode = ScheduleMode::counting;
  s.betas = {Beta(0.0), Beta(0.25), Beta(0.5), Beta::infinity()};
  s.gamma = 0.5;
  s.outer_steps = 2;
  const Schedule back = schedule_from_json(to_json(s));
  EXPECT_EQ(back.mode, ScheduleMode::counting);
  ASSERT_EQ(back.betas.size(), 4u);
  EXPECT_TRUE(back.betas[3].is_infinite());
  EXPECT_EQ(back.betas[1].value(), 0.25);
  EXPECT_EQ(back.outer_steps, 2);
  EXPECT_TRUE(std::isnan(back.length_bound));
  EXPECT_THROW(schedule_from_json(json{{"betas", {0.0, "hot"}}}), ParseError);
  EXPECT_THROW(schedule_from_json(json{{"mode", "bogus"}, {"betas", json::array()}}), ParseError);
}

TEST(Report, CsvWritersEmitOneRowPerItem) {
  Schedule s;
  s.betas = {Beta(0.0), Beta(0.5), Beta::infinity()};
  s.certificates = {{Beta(0.0), Beta(0.5), 0.3}};
  std::ostringstream os;
  write_schedule_csv(os, s);
  EXPECT_EQ(os.str(), "index,from,to,overlap_estimate,inherited,fallback\n0,0,0.5,0.29999999999999999,0,0\n1,0.5,inf,nan,0,0\n");
  const ProblemInstance inst = load("coin16_n10");
  const GibbsDistribution g = gibbs(inst, Beta(1.0));
  std::ostringstream amps;
  write_amplitudes_csv(amps, inst, qsample(g).amplitudes, g.probs);
  const std::string text = amps.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 17);
}

TEST(Report, DigestIsStable) {
  EXPECT_EQ(json_digest(json{{"a", 1}}), json_digest(json{{"a", 1}}));
  EXPECT_NE(json_digest(json{{"a", 1}}), json_digest(json{{"a", 2}}));
  EXPECT_EQ(json_digest(json{{"a", 1}}).size(), 16u);
}

}  // namespace
}  // namespace qsalab
