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
#include <map>
#include <mutex>
#include <ostream>
#include <shared_mutex>
#include <span>
#include <vector>

#include "qsalab/errors.hpp"
#include "qsalab/markov_chain.hpp"
#include "qsalab/problem.hpp"
#include "qsalab/rng.hpp"

namespace qsalab {

struct PartitionValue {
  double z = 0.0;
  double log_z = 0.0;
};

/// log Z(beta) summed level by level over the energy histogram.
///
/// Independent of gibbs(): states are bucketed by energy, each bucket is
/// reduced separately, and buckets are combined from high to low energy.
inline PartitionValue exact_partition(const ProblemInstance& inst, Beta beta) {
  std::map<double, std::vector<double>> levels;
  for (std::size_t i = 0; i < inst.size(); ++i) levels[inst.energies[i]].push_back(inst.log_weights[i]);
  std::vector<double> terms;
  for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
    const double h = it->first;
    if (beta.is_infinite() && h != 0.0) continue;
    const double level = log_sum_exp(it->second);
    terms.push_back(beta.is_infinite() ? level : level - beta.value() * h);
  }
  PartitionValue v;
  v.log_z = log_sum_exp(terms);
  if (beta.is_infinite()) {
    if (inst.log_z_drift != 0.0) throw UnsupportedInstanceError("beta = inf is undefined for a reversed instance");
    if (v.log_z == -kInf) throw UnsupportedInstanceError("ground set is empty, Z(inf) = 0");
  } else {
    v.log_z += beta.value() * inst.log_z_drift;
  }
  v.z = std::exp(v.log_z);
  return v;
}

/// Memoized exact profile f(beta) = log Z(beta) and f'(beta) = -E[H] (+ drift).
///
/// Reads take a shared lock; first writes take an exclusive lock. Values are
/// idempotent, so racing writers store the same entry.
class OracleTable {
 public:
  struct Entry {
    double log_z;
    double fprime;
  };

  explicit OracleTable(ProblemInstance inst) : inst_(std::move(inst)), digest_(inst_.digest()) {}

  const ProblemInstance& instance() const { return inst_; }
  const std::string& digest() const { return digest_; }

  Entry at(Beta b) const {
    {
      std::shared_lock lock(mu_);
      auto it = memo_.find(b.value());
      if (it != memo_.end()) return it->second;
    }
    const GibbsDistribution g = gibbs(inst_, b);
    double mean_h = 0.0;
    for (std::size_t i = 0; i < inst_.size(); ++i) mean_h += g.probs[i] * inst_.energies[i];
    Entry e{g.log_z, -mean_h + (b.is_infinite() ? 0.0 : inst_.log_z_drift)};
    std::unique_lock lock(mu_);
    memo_.emplace(b.value(), e);
    return e;
  }

  double f(Beta b) const { return at(b).log_z; }
  double f(double b) const { return f(Beta(b)); }
  double fprime(Beta b) const { return at(b).fprime; }
  double fprime(double b) const { return fprime(Beta(b)); }
  double z(Beta b) const { return std::exp(f(b)); }
  std::size_t memo_size() const {
    std::shared_lock lock(mu_);
    return memo_.size();
  }

  /// |<Pi_a|Pi_b>|^2 = Z((a+b)/2)^2 / (Z(a) Z(b)).
  double overlap(Beta a, Beta b) const { return std::exp(-log_slow_varying(a, b)); }

  /// log Z(a) Z(b) / Z((a+b)/2)^2.
  double log_slow_varying(Beta a, Beta b) const {
    const Beta mid = (a.is_infinite() || b.is_infinite()) ? Beta::infinity() : Beta(0.5 * (a.value() + b.value()));
    return f(a) + f(b) - 2.0 * f(mid);
  }
  double slow_varying_ratio(Beta a, Beta b) const { return std::exp(log_slow_varying(a, b)); }

  /// log Z(2b - a) Z(a) / Z(b)^2, for a <= b.
  double log_chebyshev(Beta a, Beta b) const {
    if (b.is_infinite()) return f(a) - f(b);
    return f(Beta(2.0 * b.value() - a.value())) + f(a) - 2.0 * f(b);
  }
  double chebyshev_ratio(Beta a, Beta b) const { return std::exp(log_chebyshev(a, b)); }

  /// Z(b) / Z(a) = E_{Pi_a}[W_{a,b}] up to the drift factor.
  double ratio(Beta a, Beta b) const { return std::exp(f(b) - f(a)); }

 private:
  ProblemInstance inst_;
  std::string digest_;
  mutable std::shared_mutex mu_;
  mutable std::map<double, Entry> memo_;
};

/// Smallest beta on the grid {0, h, 2h, ...} with f(beta) <= 1 or f(beta) - f(inf) <= 1.
inline double locate_gamma(const OracleTable& oracle, double precision) {
  const double f_inf = oracle.f(Beta::infinity());
  auto ok = [&](long long j) {
    const double fb = oracle.f(Beta(static_cast<double>(j) * precision));
    return fb <= 1.0 || fb - f_inf <= 1.0;
  };
  if (ok(0)) return 0.0;
  if (!(precision > 0.0) || !std::isfinite(precision)) throw DomainError("gamma search needs a positive precision");
  long long hi = 1;
  while (!ok(hi)) {
    if (hi > (1LL << 50)) throw DomainError("gamma could not be bracketed");
    hi *= 2;
  }
  long long lo = hi / 2;  // lo fails (or is 0, which failed above)
  while (hi - lo > 1) {
    const long long mid = lo + (hi - lo) / 2;
    (ok(mid) ? hi : lo) = mid;
  }
  return static_cast<double>(hi) * precision;
}

/// gamma0 > 0 with f(gamma0) = 1, by bisection to the given tolerance.
inline double locate_reverse_gamma(const OracleTable& oracle, double tol = 1e-13) {
  if (oracle.f(Beta(0.0)) <= 1.0)
    throw UnsupportedInstanceError("Z(0) <= e, reverse annealing has no starting temperature");
  if (oracle.f(Beta::infinity()) >= 1.0) throw UnsupportedInstanceError("Z(inf) >= e, f never reaches 1");
  double lo = 0.0, hi = 1.0;
  while (oracle.f(Beta(hi)) > 1.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw DomainError("gamma0 could not be bracketed");
  }
  while (hi - lo > tol * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (oracle.f(Beta(mid)) > 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Classical telescoping estimate with exact Gibbs sampling at each schedule point.
/// Returns an estimate of log Z(last) given the exact log Z(first).
inline double classical_svv_log_estimate(const ProblemInstance& inst, const std::vector<Beta>& betas,
                                         int samples_per_step, Rng& rng) {
  if (betas.empty()) throw DomainError("empty schedule");
  if (samples_per_step < 1) throw DomainError("need at least one sample per step");
  double log_z = gibbs(inst, betas.front()).log_z;
  for (std::size_t i = 0; i + 1 < betas.size(); ++i) {
    const Beta a = betas[i], b = betas[i + 1];
    if (b < a) throw DomainError("schedule must be nondecreasing");
    if (b == a) continue;
    const GibbsDistribution g = gibbs(inst, a);
    std::vector<double> cdf(g.probs.size());
    double acc = 0.0;
    for (std::size_t x = 0; x < g.probs.size(); ++x) cdf[x] = acc += g.probs[x];
    double sum = 0.0;
    for (int s = 0; s < samples_per_step; ++s) {
      const std::size_t x = rng.sample_cdf(cdf);
      const double h = inst.energies[x];
      sum += b.is_infinite() ? (h == 0.0 ? 1.0 : 0.0) : std::exp(-(b.value() - a.value()) * h);
    }
    log_z += std::log(sum / samples_per_step);
    if (!b.is_infinite()) log_z += (b.value() - a.value()) * inst.log_z_drift;
  }
  return log_z;
}

inline double classical_svv_estimate(const ProblemInstance& inst, const std::vector<Beta>& betas,
                                     int samples_per_step, Rng& rng) {
  return std::exp(classical_svv_log_estimate(inst, betas, samples_per_step, rng));
}

struct WarmStartRow {
  int t = 0;
  double tv = 0.0;
  double bound = 0.0;
  bool holds = true;
};

/// ||nu0 / pi - 1||_{2, pi}.
inline double chi_norm(std::span<const double> nu0, std::span<const double> pi) {
  double s = 0.0;
  for (std::size_t x = 0; x < pi.size(); ++x) {
    const double r = nu0[x] / pi[x] - 1.0;
    s += pi[x] * r * r;
  }
  return std::sqrt(s);
}

/// Both sides of ||nu_t - pi||_TV <= e^{-delta t / 2} ||nu0 / pi - 1||_{2, pi}.
inline std::vector<WarmStartRow> warm_start_check(const TransitionMatrix& chain, std::span<const double> nu0,
                                                  const std::vector<int>& ts) {
  const auto& pi = chain.stationary.probs;
  for (std::size_t x = 0; x < pi.size(); ++x)
    if (!(pi[x] > 0.0)) throw DomainError("stationary distribution must be positive");
  const double chi = chi_norm(nu0, pi);
  std::vector<WarmStartRow> rows;
  std::vector<int> sorted = ts;
  std::sort(sorted.begin(), sorted.end());
  Eigen::RowVectorXd v = Eigen::Map<const Eigen::RowVectorXd>(nu0.data(), static_cast<Eigen::Index>(nu0.size()));
  int cur = 0;
  for (int t : sorted) {
    for (; cur < t; ++cur) v = v * chain.probs;
    WarmStartRow r;
    r.t = t;
    double tv = 0.0;
    for (Eigen::Index x = 0; x < v.size(); ++x) tv += std::abs(v(x) - pi[static_cast<std::size_t>(x)]);
    r.tv = 0.5 * tv;
    r.bound = std::exp(-chain.gap * t / 2.0) * chi;
    r.holds = r.tv <= r.bound + 1e-12;
    rows.push_back(r);
  }
  return rows;
}

/// CSV rows (beta, logZ, fprime) for plotting the convex profile.
inline void write_profile_csv(std::ostream& os, const OracleTable& oracle, const std::vector<double>& betas) {
  os << "beta,logZ,fprime\n";
  os.precision(17);
  for (double b : betas) {
    const auto e = oracle.at(Beta(b));
    os << b << ',' << e.log_z << ',' << e.fprime << '\n';
  }
}

}  // namespace qsalab
