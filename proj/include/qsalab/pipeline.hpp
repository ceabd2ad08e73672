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

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "qsalab/amplitude_estimation.hpp"
#include "qsalab/cost_ledger.hpp"
#include "qsalab/errors.hpp"
#include "qsalab/oracle.hpp"
#include "qsalab/problem.hpp"
#include "qsalab/quantum_walk.hpp"
#include "qsalab/rng.hpp"
#include "qsalab/schedule.hpp"

namespace qsalab {

/// Parameters of an end-to-end run.
struct RunParams {
  double B = std::exp(2.0);
  double p = std::exp(-2.0);
  double epsilon = 0.1;
  double eta = 0.05;
  /// Fourier size of ratio estimates; 0 selects it from a pilot estimate.
  int M = 0;
  /// Reflection precision; 0 means exact reflections.
  int k = 0;
  int pilot_M = 32;
  int max_M = 1 << 14;
  bool strict_stall = false;

  ReflectionMode mode() const { return k > 0 ? ReflectionMode::approximate : ReflectionMode::exact; }

  void validate() const {
    if (!(B > 1.0)) throw DomainError("B must exceed 1");
    if (!(p > 0.0 && p < 1.0)) throw DomainError("p must lie in (0, 1)");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in (0, 1)");
    if (!(eta > 0.0 && eta < 1.0)) throw DomainError("eta must lie in (0, 1)");
    if (M != 0 && (M < 2 || !is_power_of_two(M))) throw DomainError("M must be a power of two >= 2");
    if (k < 0) throw DomainError("k must be nonnegative");
  }
};

struct AnnealResult {
  Eigen::VectorXcd state;
  int rounds = 0;
};

/// Walk-step charge of one annealing step at gap delta:
/// sqrt(1/delta) log^2(l/eps) (1/p) log(1/p).
inline double anneal_step_model_cost(double delta, double p, std::size_t planned_length, double epsilon) {
  const double l = std::max<double>(static_cast<double>(planned_length), 1.0);
  const double lg = std::log(std::max(l / epsilon, std::exp(1.0)));
  return std::sqrt(1.0 / delta) * lg * lg * (1.0 / p) * std::log(1.0 / p);
}

/// Round cap for projection-based transfer with certified overlap p.
inline int anneal_round_cap(double p, double eta) {
  const double pc = std::min(p, 0.5);
  const double s = 2.0 * pc * (1.0 - pc);
  return 4 + static_cast<int>(std::ceil(std::log(1.0 / eta) / s));
}

/// Moves a qsample of `from` to a qsample of `to` by alternating the two
/// reflection-induced measurements until the `to` outcome is seen.
inline AnnealResult anneal_step(const Eigen::VectorXcd& state, const ReflectionOperator& from,
                                const ReflectionOperator& to, double p, double eta, Rng& rng, CostLedger* ledger,
                                double model_cost = 0.0) {
  AnnealResult out;
  out.state = state;
  if (ledger) ledger->model_walk_steps += model_cost;
  if (from.has_target() && to.has_target() && from.form() == to.form() &&
      from.form() == ReflectionOperator::Form::rank_one && (from.target() - to.target()).norm() == 0.0)
    return out;
  const int cap = anneal_round_cap(p, eta);
  Eigen::VectorXcd v = state / state.norm();
  for (int round = 1; round <= cap; ++round) {
    out.rounds = round;
    if (ledger) {
      ledger->charge(1, to.walk_steps_per_use());
      ledger->anneal_rounds += 1;
    }
    Eigen::VectorXcd acc = to.accept(v);
    const double pa = acc.squaredNorm();
    if (rng.uniform() < pa) {
      out.state = acc / std::sqrt(pa);
      return out;
    }
    Eigen::VectorXcd rej = to.reject(v);
    v = rej / rej.norm();
    if (ledger) ledger->charge(1, from.walk_steps_per_use());
    Eigen::VectorXcd back = from.accept(v);
    const double pb = back.squaredNorm();
    if (rng.uniform() < pb) {
      v = back / std::sqrt(pb);
    } else {
      Eigen::VectorXcd r = from.reject(v);
      v = r / r.norm();
    }
  }
  throw AnnealFailureError("qsample transfer exceeded its round cap", cap);
}

struct RatioEstimate {
  std::size_t index = 0;
  Beta from;
  Beta to;
  double w_hat = 0.0;
  /// Known multiplicative factor (reversed instances); the ratio is factor * w_hat.
  double log_factor = 0.0;
  double epsilon = 0.0;
  AmplitudeEstimate transcript;
};

struct RatioOutcome {
  RatioEstimate estimate;
  Eigen::VectorXcd state;
};

/// W on the state space for the step a -> b; b = inf gives the ground indicator.
inline std::vector<double> ratio_weights(const ProblemInstance& inst, Beta a, Beta b) {
  std::vector<double> w(inst.size());
  for (std::size_t x = 0; x < inst.size(); ++x) {
    const double h = inst.energies[x];
    w[x] = b.is_infinite() ? (h == 0.0 ? 1.0 : 0.0) : std::exp(-(b.value() - a.value()) * h);
  }
  return w;
}

/// Nondestructive estimate of E_psi[w] through the ancilla encoding.
/// `r_state` is the reflection about the qsample held in `state`.
inline RatioOutcome estimate_expectation(const Eigen::VectorXcd& state, const ReflectionOperator& r_state,
                                         const std::vector<double>& w, int M, double eta, Rng& rng,
                                         CostLedger* ledger) {
  const Eigen::VectorXcd psi = encode_with_ancilla(state, w);
  const ReflectionOperator r_psi = r_state.with_ancilla_encoding(w);
  std::vector<char> mask(2 * w.size(), 0);
  for (std::size_t x = 0; x < w.size(); ++x) mask[2 * x + 1] = 1;
  const ReflectionOperator r = ReflectionOperator::projector(std::move(mask));
  const GroverOperator Q(r_psi, r, psi);
  NondestructiveResult res = nondestructive_estimate(Q, M, eta, rng, ledger);
  RatioOutcome out;
  out.estimate.w_hat = res.estimate.a_hat;
  out.estimate.transcript = res.estimate;
  Eigen::VectorXcd site = decode_ancilla(res.state, w);
  out.state = site / site.norm();
  if (!(out.estimate.w_hat > 0.0)) throw DegenerateRatioError("ratio estimate is zero");
  return out;
}

/// Smallest power-of-two M whose BHMT bound, relative to a_lo, is at most rel.
inline int fourier_size_for_relative(double a_lo, double rel, int max_M) {
  int M = 2;
  while (M < max_M && bhmt_bound(a_lo, M) > rel * a_lo) M *= 2;
  return M;
}

/// Ratio E_{Pi_a}[W_{a,b}] with the Fourier size chosen from a pilot estimate
/// when M = 0.
inline RatioOutcome estimate_ratio(const Eigen::VectorXcd& state, QsampleContext& ctx, Beta a, Beta b,
                                   double rel_error, int M, int pilot_M, int max_M, ErrorBudget& budget, Rng& rng,
                                   CostLedger* ledger) {
  if (b < a) throw DomainError("ratio steps must go up in beta");
  const ProblemInstance& inst = ctx.instance();
  const std::vector<double> w = ratio_weights(inst, a, b);
  const ReflectionOperator& r_state = ctx.reflection_at(a);
  Eigen::VectorXcd cur = state;
  if (M == 0) {
    RatioOutcome pilot = estimate_expectation(cur, r_state, w, pilot_M, budget.next(), rng, ledger);
    cur = pilot.state;
    const double a_lo = std::max(pilot.estimate.w_hat - bhmt_bound(pilot.estimate.w_hat, pilot_M), 1e-6);
    M = std::max(pilot_M, fourier_size_for_relative(a_lo, rel_error, max_M));
  }
  RatioOutcome out = estimate_expectation(cur, r_state, w, M, budget.next(), rng, ledger);
  out.estimate.from = a;
  out.estimate.to = b;
  out.estimate.epsilon = rel_error;
  if (!b.is_infinite()) out.estimate.log_factor = (b.value() - a.value()) * inst.log_z_drift;
  return out;
}

struct EstimationReport {
  double z_hat = kNaN;
  double log_z_hat = kNaN;
  std::vector<RatioEstimate> ratios;
  Schedule schedule;
  CostLedger cost;
  std::uint64_t seed = 0;
  std::string instance_digest;
  double wall_seconds = 0.0;
  std::string mode;
};

struct BayesResult {
  Eigen::VectorXcd state;
  Schedule schedule;
  EstimationReport report;
};

struct CountingResult {
  double z_hat = kNaN;
  Schedule schedule;
  EstimationReport report;
};

namespace detail {

inline int auto_k(int M) { return static_cast<int>(std::ceil(std::log2(static_cast<double>(M)))) + 3; }

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Anneals the prior qsample to the posterior along an adaptively built schedule.
inline BayesResult run_bayesian(const ProblemInstance& inst, const RunParams& params, Rng& rng) {
  params.validate();
  if (inst.kind() != ProblemKind::bayes) throw UnsupportedInstanceError("run_bayesian needs a bayes instance");
  const auto t0 = std::chrono::steady_clock::now();
  const double eps_e = params.p / 10.0;
  SearchSettings settings;
  settings.M = fourier_size_for(eps_e);
  settings.strict_stall = params.strict_stall;
  QsampleContext ctx(inst, params.mode(), params.k);

  const double maxL = inst.max_energy();
  const double precision = maxL > 0.0 ? 1.0 / maxL : 1.0;
  const auto grid = static_cast<std::size_t>(std::ceil(1.0 / precision));
  const std::size_t l_plan =
      static_cast<std::size_t>(std::ceil(std::sqrt(std::max(maxL, 1.0) * std::max(std::log(std::max(maxL, 1.0)), 1.0)))) + 2;
  const std::size_t probes = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(grid) + 1.0))) + 2;
  ErrorBudget budget(params.eta, l_plan * (probes + 1));

  BayesResult out;
  out.schedule.mode = ScheduleMode::bayes;
  out.schedule.gamma = 1.0;
  out.schedule.betas.push_back(Beta(0.0));
  CostLedger ledger;
  Eigen::VectorXcd state = qsample(gibbs(inst, Beta(0.0))).amplitudes;
  Beta cur(0.0);
  while (cur.value() < 1.0) {
    BetaStep step = next_beta_bayes(ctx, cur, state, params.p, precision, settings, budget, rng, ledger);
    const Beta nxt = step.next.front();
    const auto& from = ctx.at(cur);
    const ReflectionOperator r_from = from.reflection;
    const auto& to = ctx.at(nxt);
    const double cost = anneal_step_model_cost(to.chain_gap, params.p, l_plan, params.epsilon);
    AnnealResult ar = anneal_step(step.state, r_from, to.reflection, 0.8 * params.p, budget.next(), rng, &ledger, cost);
    state = ar.state;
    for (auto& c : step.certificates) out.schedule.certificates.push_back(std::move(c));
    out.schedule.betas.push_back(nxt);
    cur = nxt;
  }
  out.schedule.outer_steps = static_cast<int>(out.schedule.length());
  out.state = state;
  out.report.schedule = out.schedule;
  out.report.cost = ledger;
  out.report.seed = rng.seed();
  out.report.instance_digest = inst.digest();
  out.report.mode = "bayes";
  out.report.wall_seconds = detail::seconds_since(t0);
  return out;
}

namespace detail {

struct CountingLoop {
  Schedule schedule;
  std::vector<RatioEstimate> ratios;
  double log_product = 0.0;
  Eigen::VectorXcd state;
};

// Adaptive blocks from beta = 0 up to `end`, estimating each ratio before
// annealing across it.
inline CountingLoop counting_loop(QsampleContext& ctx, Eigen::VectorXcd state, double end, const RunParams& params,
                                  double rel_error, std::size_t l_plan, ErrorBudget& budget, Rng& rng,
                                  CostLedger& ledger) {
  const ProblemInstance& inst = ctx.instance();
  const double n = inst.n_bound;
  const double precision = n > 0.0 ? 1.0 / n : 1.0;
  const int m = chebyshev_refinements(inst.size());
  SearchSettings settings;
  settings.M = fourier_size_for(0.1 / params.B);
  settings.strict_stall = params.strict_stall;
  const int M = params.M;

  CountingLoop out;
  out.schedule.mode = ScheduleMode::counting;
  out.schedule.gamma = end;
  out.schedule.betas.push_back(Beta(0.0));
  Beta cur(0.0);
  while (cur.value() < end) {
    BetaStep step = next_beta_counting(ctx, cur, state, params.B, precision, end, m, settings, budget, rng, ledger);
    state = step.state;
    out.schedule.outer_steps += 1;
    for (std::size_t j = 0; j < step.next.size(); ++j) {
      const Beta nxt = step.next[j];
      RatioOutcome ro = estimate_ratio(state, ctx, cur, nxt, rel_error, M, params.pilot_M, params.max_M, budget, rng,
                                       &ledger);
      ro.estimate.index = out.ratios.size();
      out.log_product += std::log(ro.estimate.w_hat) + ro.estimate.log_factor;
      out.ratios.push_back(ro.estimate);
      const ReflectionOperator r_from = ctx.reflection_at(cur);
      const auto& to = ctx.at(nxt);
      const double cost = anneal_step_model_cost(to.chain_gap, 1.0 / params.B, l_plan, params.epsilon);
      AnnealResult ar = anneal_step(ro.state, r_from, to.reflection, 0.8 / params.B, budget.next(), rng, &ledger, cost);
      state = ar.state;
      out.schedule.certificates.push_back(step.certificates[j]);
      out.schedule.betas.push_back(nxt);
      cur = nxt;
    }
  }
  out.state = std::move(state);
  return out;
}

inline std::size_t planned_outer_steps(std::size_t omega, double n) {
  const double v = std::sqrt(std::log(std::max<double>(static_cast<double>(omega), 2.0)) * std::max(1.0, std::log(std::max(n, 1.0))));
  return static_cast<std::size_t>(std::max(1.0, std::ceil(v)));
}

}  // namespace detail

/// Estimates Z(inf) by annealing from beta = 0 to gamma and then to inf.
inline CountingResult run_counting(const ProblemInstance& inst, const RunParams& params, Rng& rng) {
  params.validate();
  if (!is_counting(inst.kind())) throw UnsupportedInstanceError("run_counting needs a counting instance");
  if (inst.is_reversed()) throw UnsupportedInstanceError("use run_counting_reverse for reversed annealing");
  const auto t0 = std::chrono::steady_clock::now();
  const OracleTable oracle(inst);
  if (oracle.f(Beta::infinity()) < 0.0) throw UnsupportedInstanceError("Z(inf) < 1");
  const double n = inst.n_bound;
  const double gamma = n > 0.0 ? locate_gamma(oracle, 1.0 / n) : 0.0;

  const int m = chebyshev_refinements(inst.size());
  const std::size_t outer = detail::planned_outer_steps(inst.size(), n);
  const std::size_t l_plan = outer * static_cast<std::size_t>(m + 1) + 1;
  const std::size_t probes = static_cast<std::size_t>(std::ceil(std::log2(std::max(2.0 * gamma * std::max(n, 1.0), 1.0) + 1.0))) + 2;
  ErrorBudget budget(params.eta, outer * probes + l_plan * 3);
  const double rel_error = std::log1p(params.epsilon) / static_cast<double>(l_plan);

  QsampleContext ctx(inst, params.mode(), params.k > 0 ? params.k : 1);
  CostLedger ledger;
  const double log_z0 = gibbs(inst, Beta(0.0)).log_z;
  Eigen::VectorXcd state = qsample(gibbs(inst, Beta(0.0))).amplitudes;

  detail::CountingLoop loop;
  if (gamma > 0.0) {
    loop = detail::counting_loop(ctx, state, gamma, params, rel_error, l_plan, budget, rng, ledger);
  } else {
    loop.schedule.mode = ScheduleMode::counting;
    loop.schedule.gamma = 0.0;
    loop.schedule.betas.push_back(Beta(0.0));
    loop.state = state;
  }
  RatioOutcome last = estimate_ratio(loop.state, ctx, Beta(gamma), Beta::infinity(), rel_error, params.M,
                                     params.pilot_M, params.max_M, budget, rng, &ledger);
  last.estimate.index = loop.ratios.size();
  loop.log_product += std::log(last.estimate.w_hat);
  loop.ratios.push_back(last.estimate);
  loop.schedule.betas.push_back(Beta::infinity());
  loop.schedule.certificates.push_back({Beta(gamma), Beta::infinity()});
  loop.schedule.length_bound = length_bound(ConvexProfile::from_oracle(oracle), gamma).value;

  CountingResult out;
  out.report.log_z_hat = log_z0 + loop.log_product;
  out.report.z_hat = out.z_hat = std::exp(out.report.log_z_hat);
  out.schedule = loop.schedule;
  out.report.schedule = loop.schedule;
  out.report.ratios = std::move(loop.ratios);
  out.report.cost = ledger;
  out.report.seed = rng.seed();
  out.report.instance_digest = inst.digest();
  out.report.mode = "count";
  out.report.wall_seconds = detail::seconds_since(t0);
  return out;
}

/// Estimates Z(0) = |Omega| for matching / independent-set instances by
/// annealing the reversed instance from the ground-state qsample.
inline CountingResult run_counting_reverse(const ProblemInstance& inst, const RunParams& params, Rng& rng) {
  params.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const OracleTable oracle(inst);
  const double gamma0 = locate_reverse_gamma(oracle);
  const ProblemInstance rev = reverse_transform(inst, gamma0);

  const double n = rev.n_bound;
  const int m = chebyshev_refinements(rev.size());
  const std::size_t outer = detail::planned_outer_steps(rev.size(), n);
  const std::size_t l_plan = outer * static_cast<std::size_t>(m + 1) + 2;
  const std::size_t probes = static_cast<std::size_t>(std::ceil(std::log2(2.0 * gamma0 * std::max(n, 1.0) + 1.0))) + 2;
  ErrorBudget budget(params.eta, outer * probes + l_plan * 3 + 1);
  const double rel_error = std::log1p(params.epsilon) / static_cast<double>(l_plan);

  QsampleContext ctx(rev, params.mode(), params.k > 0 ? params.k : 1);
  CostLedger ledger;

  // Ground-state qsample of the original instance: the states with H = 0.
  const GibbsDistribution ground = gibbs(inst, Beta::infinity());
  const Eigen::VectorXcd ground_state = qsample(ground).amplitudes;
  const ReflectionOperator r_ground = ReflectionOperator::exact(ground_state, 0);
  const auto& start = ctx.at(Beta(0.0));
  const double p_start = std::exp(-oracle.f(Beta(gamma0)));
  AnnealResult ar = anneal_step(ground_state, r_ground, start.reflection, p_start, budget.next(), rng, &ledger,
                                anneal_step_model_cost(start.chain_gap, p_start, l_plan, params.epsilon));

  // Z'(0) = Z(gamma0) = 1 / Pi_{gamma0}(ground set) since Z(inf) = 1.
  std::vector<double> indicator(rev.size());
  for (std::size_t x = 0; x < rev.size(); ++x) indicator[x] = inst.energies[x] == 0.0 ? 1.0 : 0.0;
  int M0 = params.M;
  Eigen::VectorXcd state = ar.state;
  if (M0 == 0) {
    RatioOutcome pilot = estimate_expectation(state, start.reflection, indicator, params.pilot_M, budget.next(), rng, &ledger);
    state = pilot.state;
    const double a_lo = std::max(pilot.estimate.w_hat - bhmt_bound(pilot.estimate.w_hat, params.pilot_M), 1e-6);
    M0 = std::max(params.pilot_M, fourier_size_for_relative(a_lo, rel_error, params.max_M));
  }
  RatioOutcome first = estimate_expectation(state, ctx.reflection_at(Beta(0.0)), indicator, M0, budget.next(), rng, &ledger);
  first.estimate.from = Beta::infinity();
  first.estimate.to = Beta(0.0);
  first.estimate.epsilon = rel_error;
  const double log_z_start = -std::log(first.estimate.w_hat);

  detail::CountingLoop loop =
      detail::counting_loop(ctx, first.state, gamma0, params, rel_error, l_plan, budget, rng, ledger);
  loop.schedule.length_bound = length_bound(ConvexProfile::from_oracle(OracleTable(rev)), gamma0).value;

  CountingResult out;
  out.report.log_z_hat = log_z_start + loop.log_product;
  out.report.z_hat = out.z_hat = std::exp(out.report.log_z_hat);
  out.schedule = loop.schedule;
  out.report.schedule = loop.schedule;
  out.report.ratios.push_back(first.estimate);
  for (auto& r : loop.ratios) {
    r.index = out.report.ratios.size();
    out.report.ratios.push_back(r);
  }
  out.report.cost = ledger;
  out.report.seed = rng.seed();
  out.report.instance_digest = rev.digest();
  out.report.mode = "count_reverse";
  out.report.wall_seconds = detail::seconds_since(t0);
  return out;
}

}  // namespace qsalab
