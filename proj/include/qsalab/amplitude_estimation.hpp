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
#include <complex>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "qsalab/cost_ledger.hpp"
#include "qsalab/errors.hpp"
#include "qsalab/quantum_walk.hpp"
#include "qsalab/rng.hpp"

namespace qsalab {

/// Eigencomponent of a state under Q: weight * vector with Q vector = e^{2 pi i omega} vector.
struct SpectralComponent {
  double omega = 0.0;
  cplx weight;
  Eigen::VectorXcd vector;
};

/// Grover iterate Q = -R_psi R with the decomposition of psi in its eigenbasis.
///
/// When both reflections are exact and psi is the target of R_psi, the
/// invariant plane span{psi1, psi0} is handled analytically. Otherwise Q is
/// formed densely and diagonalized through its complex Schur form.
class GroverOperator {
 public:
  GroverOperator(const ReflectionOperator& r_psi, const ReflectionOperator& r)
      : GroverOperator(r_psi, r, r_psi.target()) {}

  GroverOperator(const ReflectionOperator& r_psi, const ReflectionOperator& r, const Eigen::VectorXcd& psi)
      : r_psi_(r_psi), r_(r), psi_(psi) {
    if (r_psi.dim() != r.dim() || static_cast<std::size_t>(psi.size()) != r.dim())
      throw DomainError("reflections and state act on different spaces");
    if (std::abs(psi.norm() - 1.0) > 1e-9) throw DomainError("psi must be a unit vector");
    const bool exact = r_psi.form() == ReflectionOperator::Form::rank_one && r.is_exact_involution() &&
                       fidelity(psi, r_psi.target()) > 1.0 - 1e-12;
    if (exact) build_plane();
    else build_dense();
  }

  const ReflectionOperator& r_psi() const { return r_psi_; }
  const ReflectionOperator& r() const { return r_; }
  const Eigen::VectorXcd& psi() const { return psi_; }
  bool analytic() const { return analytic_; }
  double theta() const { return theta_; }
  double amplitude() const { return std::pow(std::sin(theta_), 2); }
  /// a in {0, 1}: psi is itself an eigenvector of Q.
  bool degenerate() const { return degenerate_; }
  const std::vector<SpectralComponent>& components() const { return components_; }

  /// Eigenvectors normalized so psi = (e^{-i theta} psi_plus + e^{i theta} psi_minus) / sqrt(2).
  const Eigen::VectorXcd& psi_plus() const { return psi_pm_[0]; }
  const Eigen::VectorXcd& psi_minus() const { return psi_pm_[1]; }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const { return -r_psi_.apply(r_.apply(v)); }

  Eigen::MatrixXcd matrix() const { return -r_psi_.matrix() * r_.matrix(); }

  /// Decomposition of an arbitrary state into eigencomponents of Q.
  std::vector<SpectralComponent> decompose(const Eigen::VectorXcd& v) const {
    std::vector<SpectralComponent> out;
    if (analytic_) {
      if (degenerate_) {
        // Q acts on psi as a phase; anything orthogonal is outside the tracked plane.
        out.push_back({components_[0].omega, psi_.dot(v), psi_});
        return out;
      }
      for (int s = 0; s < 2; ++s) {
        const cplx c = unit_pm_[s].dot(v);
        if (std::norm(c) > 0.0) out.push_back({s == 0 ? omega_plus_ : 1.0 - omega_plus_, c, unit_pm_[s]});
      }
      return out;
    }
    const Eigen::VectorXcd coeff = schur_u_.adjoint() * v;
    for (const auto& g : groups_) {
      Eigen::VectorXcd w = Eigen::VectorXcd::Zero(v.size());
      for (Eigen::Index i : g.columns) w += coeff(i) * schur_u_.col(i);
      const double n = w.norm();
      if (n * n > 1e-15) out.push_back({g.omega, n, w / n});
    }
    return out;
  }

 private:
  struct Group {
    double omega;
    std::vector<Eigen::Index> columns;
  };

  void build_plane() {
    analytic_ = true;
    const Eigen::VectorXcd p_psi = 0.5 * (r_.apply(psi_) + psi_);
    const double a = std::clamp(p_psi.squaredNorm(), 0.0, 1.0);
    theta_ = std::asin(std::sqrt(a));
    if (a < 1e-15 || a > 1.0 - 1e-15) {
      degenerate_ = true;
      theta_ = a < 0.5 ? 0.0 : std::numbers::pi / 2;
      components_.push_back({a < 0.5 ? 0.0 : 0.5, 1.0, psi_});
      psi_pm_[0] = psi_pm_[1] = psi_;
      return;
    }
    const Eigen::VectorXcd psi1 = p_psi / p_psi.norm();
    Eigen::VectorXcd psi0 = psi_ - p_psi;
    psi0 /= psi0.norm();
    const cplx i(0.0, 1.0);
    unit_pm_[0] = (psi1 + i * psi0) / std::sqrt(2.0);
    unit_pm_[1] = (psi1 - i * psi0) / std::sqrt(2.0);
    omega_plus_ = theta_ / std::numbers::pi;
    for (int s = 0; s < 2; ++s) {
      const cplx c = unit_pm_[s].dot(psi_);
      components_.push_back({s == 0 ? omega_plus_ : 1.0 - omega_plus_, c, unit_pm_[s]});
      const double sign = s == 0 ? 1.0 : -1.0;
      psi_pm_[s] = std::sqrt(2.0) * std::exp(i * (sign * theta_)) * c * unit_pm_[s];
    }
  }

  void build_dense() {
    analytic_ = false;
    Eigen::ComplexSchur<Eigen::MatrixXcd> schur(matrix());
    schur_u_ = schur.matrixU();
    const auto& T = schur.matrixT();
    std::vector<std::pair<double, Eigen::Index>> phases;
    for (Eigen::Index j = 0; j < T.rows(); ++j) {
      double w = std::arg(T(j, j)) / (2.0 * std::numbers::pi);
      if (w < 0) w += 1.0;
      if (w >= 1.0 - 1e-12) w = 0.0;
      phases.emplace_back(w, j);
    }
    std::sort(phases.begin(), phases.end());
    for (auto [w, j] : phases) {
      if (!groups_.empty() && w - groups_.back().omega < 1e-9) groups_.back().columns.push_back(j);
      else groups_.push_back({w, {j}});
    }
    components_ = decompose(psi_);
    // Principal angle from the heaviest component.
    const auto dom = std::max_element(components_.begin(), components_.end(), [](const auto& x, const auto& y) {
      return std::norm(x.weight) < std::norm(y.weight);
    });
    const double w = dom->omega;
    theta_ = std::numbers::pi * std::min(w, 1.0 - w);
    degenerate_ = components_.size() == 1 && (w == 0.0 || std::abs(w - 0.5) < 1e-12);
    psi_pm_[0] = psi_pm_[1] = dom->vector;
  }

  ReflectionOperator r_psi_, r_;
  Eigen::VectorXcd psi_;
  bool analytic_ = false;
  bool degenerate_ = false;
  double theta_ = 0.0;
  double omega_plus_ = 0.0;
  std::vector<SpectralComponent> components_;
  Eigen::VectorXcd unit_pm_[2];
  Eigen::VectorXcd psi_pm_[2];
  Eigen::MatrixXcd schur_u_;
  std::vector<Group> groups_;
};

inline GroverOperator grover(const ReflectionOperator& r_psi, const ReflectionOperator& r) {
  return GroverOperator(r_psi, r);
}

/// Amplitude of outcome y for phase omega: (1/M) sum_j e^{2 pi i j (omega - y/M)}.
inline cplx phase_outcome_amplitude(double omega, int y, int M) {
  const double delta = omega - static_cast<double>(y) / M;
  const double s = std::sin(std::numbers::pi * delta);
  if (std::abs(s) < 1e-13) return 1.0;
  const double mag = std::sin(std::numbers::pi * M * delta) / (M * s);
  return mag * std::exp(cplx(0.0, std::numbers::pi * (M - 1) * delta));
}

/// Median of q registers fails with probability <= eta when each register
/// succeeds with probability >= 8/pi^2 > 0.81: a Chernoff bound on the number
/// of failing registers gives failure <= (10/9)^{-(q-1)/2}, hence this q.
inline int powering_repetitions(double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw DomainError("eta must lie in (0, 1)");
  return 2 * static_cast<int>(std::ceil(std::log(1.0 / eta) / std::log(10.0 / 9.0))) + 1;
}

/// BHMT error bound 2 pi sqrt(a(1-a))/M + pi^2/M^2, met by a single
/// register with probability >= 8/pi^2.
inline double bhmt_bound(double a, int M) {
  const double pi = std::numbers::pi;
  return 2.0 * pi * std::sqrt(a * (1.0 - a)) / M + pi * pi / (static_cast<double>(M) * M);
}

/// The variant 2 pi a(1-a)/M + pi^2/M^2. It is tighter than bhmt_bound and
/// carries no success guarantee: for a = 0.1, M = 64 no outcome satisfies it.
inline double bhmt_bound_quadratic(double a, int M) {
  const double pi = std::numbers::pi;
  return 2.0 * pi * a * (1.0 - a) / M + pi * pi / (static_cast<double>(M) * M);
}

inline bool is_power_of_two(int M) { return M >= 1 && (M & (M - 1)) == 0; }

/// Outcome tables for phase estimation of each eigencomponent at size M.
class PhaseEstimator {
 public:
  PhaseEstimator(std::vector<SpectralComponent> comps, int M) : comps_(std::move(comps)), M_(M) {
    if (M < 2 || !is_power_of_two(M)) throw DomainError("M must be a power of two >= 2");
    double total = 0.0;
    for (const auto& c : comps_) total += std::norm(c.weight);
    if (!(total > 0.0)) throw DomainError("state has no weight on the Grover eigenspaces");
    branch_cdf_.reserve(comps_.size());
    double acc = 0.0;
    for (const auto& c : comps_) branch_cdf_.push_back(acc += std::norm(c.weight) / total);
    cdf_.resize(comps_.size());
    for (std::size_t g = 0; g < comps_.size(); ++g) {
      cdf_[g].resize(static_cast<std::size_t>(M));
      double s = 0.0;
      for (int y = 0; y < M; ++y) cdf_[g][static_cast<std::size_t>(y)] = s += std::norm(phase_outcome_amplitude(comps_[g].omega, y, M));
    }
  }

  int M() const { return M_; }
  const std::vector<SpectralComponent>& components() const { return comps_; }

  /// Exact single-register outcome distribution.
  std::vector<double> distribution() const {
    std::vector<double> p(static_cast<std::size_t>(M_), 0.0);
    for (std::size_t g = 0; g < comps_.size(); ++g) {
      const double wg = branch_cdf_[g] - (g ? branch_cdf_[g - 1] : 0.0);
      for (int y = 0; y < M_; ++y)
        p[static_cast<std::size_t>(y)] += wg * std::norm(phase_outcome_amplitude(comps_[g].omega, y, M_));
    }
    return p;
  }

  std::size_t sample_branch(Rng& rng) const { return rng.sample_cdf(branch_cdf_); }
  int sample_outcome(std::size_t g, Rng& rng) const { return static_cast<int>(rng.sample_cdf(cdf_[g])); }

  /// Post-measurement state sum_g c_g prod_r alpha(omega_g, y_r) v_g, normalized.
  Eigen::VectorXcd post_state(const std::vector<int>& ys) const {
    std::vector<double> logmag(comps_.size(), 0.0), phase(comps_.size(), 0.0);
    double best = -kInf;
    for (std::size_t g = 0; g < comps_.size(); ++g) {
      logmag[g] = std::log(std::abs(comps_[g].weight));
      phase[g] = std::arg(comps_[g].weight);
      for (int y : ys) {
        const cplx a = phase_outcome_amplitude(comps_[g].omega, y, M_);
        const double m = std::abs(a);
        logmag[g] += m > 0.0 ? std::log(m) : -kInf;
        phase[g] += std::arg(a);
      }
      best = std::max(best, logmag[g]);
    }
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(comps_.front().vector.size());
    for (std::size_t g = 0; g < comps_.size(); ++g)
      if (logmag[g] > -kInf) out += std::polar(std::exp(logmag[g] - best), phase[g]) * comps_[g].vector;
    return out / out.norm();
  }

 private:
  std::vector<SpectralComponent> comps_;
  int M_;
  std::vector<double> branch_cdf_;
  std::vector<std::vector<double>> cdf_;
};

struct AmplitudeEstimate {
  double a_hat = 0.0;
  int M = 0;
  double eta = 1.0;
  int q = 1;
  int y_median = 0;
  std::vector<int> outcomes;
  bool restored = false;
  int restore_rounds = 0;
  bool degenerate = false;
  CostLedger cost;
};

struct PhaseSample {
  int y = 0;
  Eigen::VectorXcd post_state;
};

struct EstimateResult {
  AmplitudeEstimate estimate;
  Eigen::VectorXcd post_state;
};

namespace detail {

inline void charge_pe(const GroverOperator& Q, int M, int registers, CostLedger& c) {
  // Each register applies Q up to M times: M uses of R_psi and M of R.
  const auto uses = static_cast<std::uint64_t>(M) * static_cast<std::uint64_t>(registers);
  c.charge(uses, Q.r_psi().walk_steps_per_use());
  c.charge(uses, Q.r().walk_steps_per_use());
}

inline int fold(int y, int M) { return std::min(y, M - y); }

inline EstimateResult run_powered(const GroverOperator& Q, const Eigen::VectorXcd& state, int M, int q, double eta,
                                  Rng& rng) {
  EstimateResult r;
  r.estimate.M = M;
  r.estimate.q = q;
  r.estimate.eta = eta;
  PhaseEstimator pe(Q.decompose(state), M);
  const std::size_t g = pe.sample_branch(rng);
  std::vector<int> ys(static_cast<std::size_t>(q));
  for (int& y : ys) y = pe.sample_outcome(g, rng);
  std::vector<int> folded(ys.size());
  std::transform(ys.begin(), ys.end(), folded.begin(), [M](int y) { return fold(y, M); });
  std::sort(folded.begin(), folded.end());
  r.estimate.y_median = folded[(folded.size() - 1) / 2];
  r.estimate.a_hat = std::pow(std::sin(std::numbers::pi * r.estimate.y_median / M), 2);
  r.estimate.outcomes = std::move(ys);
  r.post_state = pe.post_state(r.estimate.outcomes);
  detail::charge_pe(Q, M, q, r.estimate.cost);
  return r;
}

}  // namespace detail

/// One register of phase estimation on Q applied to state.
inline PhaseSample phase_estimate(const GroverOperator& Q, const Eigen::VectorXcd& state, int M, Rng& rng) {
  PhaseEstimator pe(Q.decompose(state), M);
  const std::size_t g = pe.sample_branch(rng);
  PhaseSample s;
  s.y = pe.sample_outcome(g, rng);
  s.post_state = pe.post_state({s.y});
  return s;
}

/// Single-register amplitude estimation, a_hat = sin^2(pi y / M).
inline EstimateResult estimate(const GroverOperator& Q, int M, Rng& rng, CostLedger* ledger = nullptr) {
  EstimateResult r;
  if (Q.degenerate() && Q.analytic()) {
    r.estimate.M = M;
    r.estimate.degenerate = true;
    r.estimate.a_hat = Q.amplitude() < 0.5 ? 0.0 : 1.0;
    r.estimate.y_median = Q.amplitude() < 0.5 ? 0 : M / 2;
    r.estimate.cost.ae_calls = 1;
    r.post_state = Q.psi();
  } else {
    PhaseSample s = phase_estimate(Q, Q.psi(), M, rng);
    r.estimate.M = M;
    r.estimate.y_median = s.y;
    r.estimate.outcomes = {s.y};
    r.estimate.a_hat = std::pow(std::sin(std::numbers::pi * s.y / M), 2);
    r.post_state = std::move(s.post_state);
    detail::charge_pe(Q, M, 1, r.estimate.cost);
    r.estimate.cost.ae_calls = 1;
  }
  if (ledger) *ledger += r.estimate.cost;
  return r;
}

inline EstimateResult estimate(const Eigen::VectorXcd& psi, const ReflectionOperator& r_psi,
                               const ReflectionOperator& r, int M, Rng& rng, CostLedger* ledger = nullptr) {
  return estimate(GroverOperator(r_psi, r, psi), M, rng, ledger);
}

/// Median-of-q amplitude estimation with failure probability <= eta.
///
/// The median is taken over folded outcomes min(y, M - y), on which
/// sin^2(pi y / M) is monotone; ties for even q take the lower median.
inline EstimateResult estimate_powered(const GroverOperator& Q, int M, double eta, Rng& rng,
                                       CostLedger* ledger = nullptr) {
  const int q = powering_repetitions(eta);
  EstimateResult r;
  if (Q.degenerate() && Q.analytic()) {
    r = estimate(Q, M, rng);
    r.estimate.q = q;
    r.estimate.eta = eta;
  } else {
    r = detail::run_powered(Q, Q.psi(), M, q, eta, rng);
    r.estimate.cost.ae_calls = 1;
  }
  if (ledger) *ledger += r.estimate.cost;
  return r;
}

inline EstimateResult estimate_powered(const Eigen::VectorXcd& psi, const ReflectionOperator& r_psi,
                                       const ReflectionOperator& r, int M, double eta, Rng& rng,
                                       CostLedger* ledger = nullptr) {
  return estimate_powered(GroverOperator(r_psi, r, psi), M, eta, rng, ledger);
}

struct RestoreResult {
  Eigen::VectorXcd state;
  int rounds = 0;
};

inline int restoration_round_cap(double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw DomainError("eta must lie in (0, 1)");
  return static_cast<int>(std::ceil(std::log2(1.0 / eta))) + 1;
}

/// Measure {accept, reject} of R_psi; on rejection recollapse by powered
/// phase estimation and try again, up to ceil(log2(1/eta)) + 1 rounds.
inline RestoreResult restore(const Eigen::VectorXcd& post_state, const GroverOperator& Q, double eta, Rng& rng,
                             CostLedger* ledger = nullptr, int M = 0) {
  const int cap = restoration_round_cap(eta);
  const int q = powering_repetitions(eta);
  if (M == 0) M = 16;
  const ReflectionOperator& r_psi = Q.r_psi();
  CostLedger cost;
  Eigen::VectorXcd state = post_state / post_state.norm();
  for (int round = 1; round <= cap; ++round) {
    cost.charge(1, r_psi.walk_steps_per_use());
    Eigen::VectorXcd acc = r_psi.accept(state);
    const double p = acc.squaredNorm();
    if (rng.uniform() < p) {
      if (ledger) *ledger += cost;
      return {acc / std::sqrt(p), round};
    }
    Eigen::VectorXcd rej = r_psi.reject(state);
    state = rej / rej.norm();
    if (round == cap) break;
    EstimateResult again = detail::run_powered(Q, state, M, q, eta, rng);
    cost += again.estimate.cost;
    state = again.post_state;
  }
  if (ledger) *ledger += cost;
  throw RestorationFailedError("state restoration exceeded its round cap",
                               std::vector<cplx>(state.data(), state.data() + state.size()));
}

struct NondestructiveResult {
  AmplitudeEstimate estimate;
  Eigen::VectorXcd state;
};

/// Powered estimation with budget eta/2 followed by restoration with eta/2.
inline NondestructiveResult nondestructive_estimate(const GroverOperator& Q, int M, double eta, Rng& rng,
                                                    CostLedger* ledger = nullptr) {
  EstimateResult e = estimate_powered(Q, M, eta / 2.0, rng);
  NondestructiveResult out;
  out.estimate = e.estimate;
  out.estimate.eta = eta;
  RestoreResult rr;
  try {
    rr = restore(e.post_state, Q, eta / 2.0, rng, &out.estimate.cost, M);
  } catch (...) {
    if (ledger) *ledger += out.estimate.cost;
    throw;
  }
  out.estimate.restored = true;
  out.estimate.restore_rounds = rr.rounds;
  out.state = std::move(rr.state);
  if (ledger) *ledger += out.estimate.cost;
  return out;
}

inline NondestructiveResult nondestructive_estimate(const Eigen::VectorXcd& psi, const ReflectionOperator& r_psi,
                                                    const ReflectionOperator& r, int M, double eta, Rng& rng,
                                                    CostLedger* ledger = nullptr) {
  return nondestructive_estimate(GroverOperator(r_psi, r, psi), M, eta, rng, ledger);
}

/// Trial transcript row for CSV streaming.
struct TrialRecord {
  std::uint64_t seed = 0;
  std::vector<int> ys;
  double a_hat = 0.0;
  double a_true = 0.0;
  double fidelity = 1.0;
};

inline void write_transcript_csv(std::ostream& os, const std::vector<TrialRecord>& rows) {
  os << "seed,ys,a_hat,a_true,fidelity\n";
  os.precision(17);
  for (const auto& r : rows) {
    os << r.seed << ',';
    for (std::size_t i = 0; i < r.ys.size(); ++i) os << (i ? ";" : "") << r.ys[i];
    os << ',' << r.a_hat << ',' << r.a_true << ',' << r.fidelity << '\n';
  }
}

}  // namespace qsalab
