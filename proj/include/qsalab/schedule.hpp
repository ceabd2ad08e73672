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
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "qsalab/amplitude_estimation.hpp"
#include "qsalab/cost_ledger.hpp"
#include "qsalab/errors.hpp"
#include "qsalab/markov_chain.hpp"
#include "qsalab/oracle.hpp"
#include "qsalab/problem.hpp"
#include "qsalab/quantum_walk.hpp"
#include "qsalab/rng.hpp"

namespace qsalab {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class ScheduleMode { bayes, counting, nonadaptive, oracle_greedy };

inline std::string to_string(ScheduleMode m) {
  switch (m) {
    case ScheduleMode::bayes: return "bayes";
    case ScheduleMode::counting: return "counting";
    case ScheduleMode::nonadaptive: return "nonadaptive";
    case ScheduleMode::oracle_greedy: return "oracle_greedy";
  }
  return "?";
}

/// One overlap probe of the binary search.
struct ProbeRecord {
  double beta = 0.0;
  double a_hat = 0.0;
  int y_median = 0;
  int M = 0;
  int q = 0;
  double eta = 0.0;
  bool accepted = false;
  int restore_rounds = 0;
};

struct PairCertificate {
  Beta from;
  Beta to;
  /// Estimated squared overlap that admitted this pair (NaN when not estimated).
  double overlap_estimate = kNaN;
  /// The pair lies inside a counting block and inherits the block's estimate.
  bool inherited = false;
  /// The search stalled and the pair is the minimal precision step.
  bool fallback = false;
  std::vector<ProbeRecord> transcript;
};

struct Schedule {
  std::vector<Beta> betas;
  ScheduleMode mode = ScheduleMode::bayes;
  std::vector<PairCertificate> certificates;
  double length_bound = kNaN;
  /// Number of binary searches (slow-varying steps); equals length() for bayes.
  int outer_steps = 0;
  double gamma = kNaN;

  std::size_t length() const { return betas.empty() ? 0 : betas.size() - 1; }
  bool strictly_increasing() const {
    for (std::size_t i = 0; i + 1 < betas.size(); ++i)
      if (!(betas[i] < betas[i + 1])) return false;
    return true;
  }
};

/// Splits a total failure (or error) budget over calls: the first `planned`
/// calls get total/(2 planned) each; later blocks of `planned` calls get
/// geometrically halving shares, so the sum never exceeds total.
class ErrorBudget {
 public:
  ErrorBudget(double total, std::size_t planned) : total_(total), planned_(std::max<std::size_t>(planned, 1)) {
    if (!(total > 0.0)) throw DomainError("error budget must be positive");
  }
  double peek() const {
    const std::size_t block = calls_ / planned_;
    return total_ / (2.0 * static_cast<double>(planned_)) / std::ldexp(1.0, static_cast<int>(block));
  }
  double next() {
    const double s = peek();
    ++calls_;
    spent_ += s;
    return s;
  }
  std::size_t calls() const { return calls_; }
  double spent() const { return spent_; }
  double total() const { return total_; }

 private:
  double total_;
  std::size_t planned_;
  std::size_t calls_ = 0;
  double spent_ = 0.0;
};

/// Reflections about the Gibbs qsamples of one instance, cached per beta.
class QsampleContext {
 public:
  struct Entry {
    ReflectionOperator reflection;
    double chain_gap = 1.0;
    double phase_gap = std::numbers::pi;
  };

  QsampleContext(const ProblemInstance& inst, ReflectionMode mode, int k) : inst_(&inst), mode_(mode), k_(k) {
    if (mode == ReflectionMode::approximate && k < 1) throw DomainError("approximate reflections need k >= 1");
  }

  const ProblemInstance& instance() const { return *inst_; }
  ReflectionMode mode() const { return mode_; }
  int k() const { return k_; }

  const Entry& at(Beta b) {
    if (b.is_infinite()) throw DomainError("no walk at beta = inf");
    auto it = cache_.find(b.value());
    if (it != cache_.end()) return *it->second;
    const TransitionMatrix chain = build_chain(*inst_, b);
    const WalkOperator walk(chain);
    auto e = std::make_unique<Entry>(Entry{reflection(walk, mode_, std::max(k_, 1)), chain.gap, walk.phase_gap()});
    if (mode_ == ReflectionMode::exact) {
      // Target is sqrt(pi) from the Gibbs distribution directly, free of eigensolver rounding.
      e->reflection = ReflectionOperator::exact(qsample(chain.stationary).amplitudes.cast<cplx>(),
                                                e->reflection.walk_steps_per_use());
    }
    if (cache_.size() > 64) cache_.clear();
    return *cache_.emplace(b.value(), std::move(e)).first->second;
  }

  const ReflectionOperator& reflection_at(Beta b) { return at(b).reflection; }

 private:
  const ProblemInstance* inst_;
  ReflectionMode mode_;
  int k_;
  std::map<double, std::unique_ptr<Entry>> cache_;
};

/// Smallest power of two M with bhmt_bound(1/2, M) <= eps, i.e. good for every a.
inline int fourier_size_for(double eps, int max_M = 1 << 14) {
  int M = 2;
  while (bhmt_bound(0.5, M) > eps) {
    if (M >= max_M) return max_M;
    M *= 2;
  }
  return M;
}

/// Settings shared by the adaptive searches.
struct SearchSettings {
  /// Fourier size of each overlap probe.
  int M = 128;
  /// Throw ScheduleStallError instead of falling back to the minimal step.
  bool strict_stall = false;
};

struct BetaStep {
  std::vector<Beta> next;
  Eigen::VectorXcd state;
  std::vector<PairCertificate> certificates;
  bool fallback = false;
};

namespace detail {

struct SearchOutcome {
  double beta = 0.0;
  double overlap_estimate = kNaN;
  bool fallback = false;
  std::vector<ProbeRecord> probes;
  Eigen::VectorXcd state;
};

// Largest grid point beta_i + j h (last point clipped to upper) whose
// estimated overlap with the current qsample reaches the threshold.
// Invariant bracket: lo qualifies (lo = 0 is beta_i), hi fails.
inline SearchOutcome search_largest(QsampleContext& ctx, Beta beta_i, Eigen::VectorXcd state, double upper,
                                    double precision, double threshold, const SearchSettings& settings,
                                    ErrorBudget& budget, Rng& rng, CostLedger& ledger) {
  if (!(precision > 0.0)) throw DomainError("search precision must be positive");
  if (!(upper > beta_i.value())) throw DomainError("search interval is empty");
  const double b0 = beta_i.value();
  const long long J = std::max(1LL, static_cast<long long>(std::ceil((upper - b0) / precision - 1e-9)));
  auto point = [&](long long j) { return j >= J ? upper : b0 + static_cast<double>(j) * precision; };
  SearchOutcome out;
  std::map<long long, double> estimates;
  const ReflectionOperator r_psi = ctx.reflection_at(beta_i);
  auto probe = [&](long long j, double eta) {
    const Beta b(point(j));
    const ReflectionOperator& r = ctx.reflection_at(b);
    const GroverOperator Q(r_psi, r, state);
    NondestructiveResult res = nondestructive_estimate(Q, settings.M, eta, rng, &ledger);
    state = res.state;
    ProbeRecord rec{b.value(), res.estimate.a_hat, res.estimate.y_median, res.estimate.M, res.estimate.q,
                    eta,       res.estimate.a_hat >= threshold, res.estimate.restore_rounds};
    out.probes.push_back(rec);
    estimates[j] = rec.a_hat;
    return rec.accepted;
  };

  long long lo = 0, hi = J;
  if (probe(J, budget.next())) {
    lo = J;
  } else {
    while (hi - lo > 1) {
      const long long mid = lo + (hi - lo) / 2;
      (probe(mid, budget.next()) ? lo : hi) = mid;
    }
  }
  if (lo == 0) {
    if (probe(1, budget.next() / 10.0)) {
      lo = 1;
    } else if (settings.strict_stall) {
      throw ScheduleStallError("no admissible inverse temperature above " + to_string(beta_i) + " + precision",
                               {b0});
    } else {
      lo = 1;
      out.fallback = true;
    }
  }
  out.beta = point(lo);
  out.overlap_estimate = estimates.count(lo) ? estimates[lo] : kNaN;
  out.state = std::move(state);
  return out;
}

}  // namespace detail

/// One step of the Bayesian schedule search on the grid beta_i + j * precision in (beta_i, 1].
///
/// Accepts when the estimate reaches p - p/10; the probe size M should make
/// the estimation error at most p/10.
inline BetaStep next_beta_bayes(QsampleContext& ctx, Beta beta_i, const Eigen::VectorXcd& state, double p,
                                double precision, const SearchSettings& settings, ErrorBudget& budget, Rng& rng,
                                CostLedger& ledger) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("p must lie in (0, 1)");
  const double eps_e = p / 10.0;
  detail::SearchOutcome s =
      detail::search_largest(ctx, beta_i, state, 1.0, precision, p - eps_e, settings, budget, rng, ledger);
  BetaStep step;
  step.next = {Beta(s.beta)};
  step.state = std::move(s.state);
  step.fallback = s.fallback;
  PairCertificate c{beta_i, Beta(s.beta), s.overlap_estimate, false, s.fallback, std::move(s.probes)};
  step.certificates.push_back(std::move(c));
  return step;
}

/// m = max(0, ceil(ln ln |Omega|)).
inline int chebyshev_refinements(std::size_t omega_size) {
  if (omega_size < 3) return 0;
  const double v = std::ceil(std::log(std::log(static_cast<double>(omega_size))) - 1e-12);
  return std::max(0, static_cast<int>(v));
}

/// One block of the counting schedule.
///
/// Finds the largest beta' in (beta_i, 2 end - beta_i] whose estimated overlap
/// with Pi_{beta_i} reaches (1 + 1/10)/B, sets b = min((beta_i + beta')/2, end)
/// and emits beta_i + (1 - 2^{-j})(b - beta_i) for j = 1..m followed by b.
/// Since 2b - beta_i <= beta', every emitted pair satisfies the Chebyshev
/// condition whenever the overlap certificate holds.
inline BetaStep next_beta_counting(QsampleContext& ctx, Beta beta_i, const Eigen::VectorXcd& state, double B,
                                   double precision, double end, int m, const SearchSettings& settings,
                                   ErrorBudget& budget, Rng& rng, CostLedger& ledger) {
  if (!(B > 1.0)) throw DomainError("B must exceed 1");
  if (!(end > beta_i.value())) throw DomainError("block starts at or after the end point");
  const double p = 1.0 / B;
  const double upper = 2.0 * end - beta_i.value();
  detail::SearchOutcome s =
      detail::search_largest(ctx, beta_i, state, upper, precision, p + p / 10.0, settings, budget, rng, ledger);
  const double b0 = beta_i.value();
  const double top = std::min(0.5 * (b0 + s.beta), end);
  BetaStep step;
  step.state = std::move(s.state);
  step.fallback = s.fallback;
  for (int j = 1; j <= m; ++j) step.next.push_back(Beta(b0 + (1.0 - std::ldexp(1.0, -j)) * (top - b0)));
  step.next.push_back(Beta(top));
  Beta prev = beta_i;
  for (std::size_t j = 0; j < step.next.size(); ++j) {
    PairCertificate c{prev, step.next[j], s.overlap_estimate, j > 0, s.fallback, {}};
    if (j == 0) c.transcript = s.probes;
    step.certificates.push_back(std::move(c));
    prev = step.next[j];
  }
  return step;
}

/// Uniform grid with spacing 1 / max H on [0, end], optionally followed by inf.
inline Schedule nonadaptive_schedule(const ProblemInstance& inst, double end, bool append_infinity) {
  Schedule s;
  s.mode = ScheduleMode::nonadaptive;
  const double hmax = inst.max_energy();
  s.betas.push_back(Beta(0.0));
  if (end > 0.0) {
    if (hmax <= 0.0) {
      s.betas.push_back(Beta(end));
    } else {
      const double h = 1.0 / hmax;
      const auto n = static_cast<long long>(std::ceil(end / h - 1e-9));
      for (long long j = 1; j < n; ++j) s.betas.push_back(Beta(static_cast<double>(j) * h));
      s.betas.push_back(Beta(end));
    }
  }
  if (append_infinity) s.betas.push_back(Beta::infinity());
  for (std::size_t i = 0; i + 1 < s.betas.size(); ++i) s.certificates.push_back({s.betas[i], s.betas[i + 1]});
  s.outer_steps = static_cast<int>(s.length());
  return s;
}

/// f and f' of a convex log-partition profile.
struct ConvexProfile {
  std::function<double(double)> f;
  std::function<double(double)> fprime;

  static ConvexProfile from_oracle(const OracleTable& oracle) {
    return {[&oracle](double b) { return oracle.f(b); }, [&oracle](double b) { return oracle.fprime(b); }};
  }
};

struct LengthBound {
  double value = 0.0;
  double fprime_start = 0.0;
  double fprime_end = 0.0;
  /// False when the logarithm's argument fell below 1 and the bound was reported as 1.
  bool domain_ok = true;
};

/// sqrt(|f(0) - f(gamma)| log(F / (G + 1))) with F, G the larger and smaller
/// of |f'(0)|, |f'(gamma)|, so that decreasing and increasing profiles are
/// treated alike.
inline LengthBound length_bound(const ConvexProfile& profile, double gamma) {
  LengthBound lb;
  lb.fprime_start = profile.fprime(0.0);
  lb.fprime_end = profile.fprime(gamma);
  const double drop = std::abs(profile.f(0.0) - profile.f(gamma));
  if (drop == 0.0) return lb;
  const double big = std::max(std::abs(lb.fprime_start), std::abs(lb.fprime_end));
  const double small = std::min(std::abs(lb.fprime_start), std::abs(lb.fprime_end));
  const double ratio = big / (small + 1.0);
  if (ratio < 1.0) {
    lb.domain_ok = false;
    lb.value = 1.0;
    return lb;
  }
  lb.value = std::sqrt(drop * std::log(ratio));
  return lb;
}

/// Greedy schedule: from each point, the largest next point in (x, gamma]
/// with f(mid) >= (f(x) + f(next)) / 2 - 1, found by bisection.
inline Schedule greedy_schedule_oracle(const ConvexProfile& profile, double gamma, double tol = 1e-12) {
  Schedule s;
  s.mode = ScheduleMode::oracle_greedy;
  s.gamma = gamma;
  s.betas.push_back(Beta(0.0));
  auto excess = [&](double a, double b) {
    const double fa = profile.f(a), fb = profile.f(b), fm = profile.f(0.5 * (a + b));
    if (fm > 0.5 * (fa + fb) + 1e-9) throw ContractViolation("profile is not convex");
    return 0.5 * (fa + fb) - fm;
  };
  double x = 0.0;
  while (x < gamma) {
    double next = gamma;
    if (excess(x, gamma) > 1.0) {
      double lo = x, hi = gamma;
      while (hi - lo > tol * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        (excess(x, mid) <= 1.0 ? lo : hi) = mid;
      }
      next = lo > x ? lo : hi;
    }
    s.certificates.push_back({Beta(x), Beta(next)});
    s.betas.push_back(Beta(next));
    x = next;
    if (s.betas.size() > 100000) throw ContractViolation("greedy schedule failed to progress");
  }
  s.outer_steps = static_cast<int>(s.length());
  s.length_bound = length_bound(profile, gamma).value;
  return s;
}

/// Exact per-pair ratios of a schedule.
struct PairCheck {
  Beta from;
  Beta to;
  double chebyshev = 1.0;
  double slow_varying = 1.0;
  double overlap = 1.0;
  bool chebyshev_ok = true;
  bool slow_varying_ok = true;
  /// slow-varying <= Chebyshev (convexity) and overlap >= 1 / Chebyshev.
  bool implication_ok = true;
};

struct VerifyReport {
  double B = std::exp(2.0);
  std::vector<PairCheck> pairs;
  bool increasing = true;
  bool all_chebyshev = true;
  bool all_slow_varying = true;
  bool all_implications = true;

  bool ok() const { return increasing && all_chebyshev && all_slow_varying && all_implications; }
};

inline VerifyReport verify_schedule(const Schedule& schedule, const OracleTable& oracle, double B = std::exp(2.0)) {
  VerifyReport rep;
  rep.B = B;
  rep.increasing = schedule.strictly_increasing();
  const double tol = 1e-9;
  for (std::size_t i = 0; i + 1 < schedule.betas.size(); ++i) {
    PairCheck c;
    c.from = schedule.betas[i];
    c.to = schedule.betas[i + 1];
    if (c.from == c.to) {
      rep.pairs.push_back(c);
      continue;
    }
    const double lc = oracle.log_chebyshev(c.from, c.to);
    const double ls = oracle.log_slow_varying(c.from, c.to);
    c.chebyshev = std::exp(lc);
    c.slow_varying = std::exp(ls);
    c.overlap = std::exp(-ls);
    c.chebyshev_ok = lc <= std::log(B) + tol;
    c.slow_varying_ok = ls <= std::log(B) + tol;
    c.implication_ok = ls <= lc + tol && c.overlap >= std::exp(-lc) * (1.0 - tol);
    rep.all_chebyshev &= c.chebyshev_ok;
    rep.all_slow_varying &= c.slow_varying_ok;
    rep.all_implications &= c.implication_ok;
    rep.pairs.push_back(c);
  }
  return rep;
}

}  // namespace qsalab
