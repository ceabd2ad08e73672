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
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qsalab/errors.hpp"
#include "qsalab/markov_chain.hpp"
#include "qsalab/problem.hpp"

namespace qsalab {

using cplx = std::complex<double>;

enum class SpaceTag { site, edge, site_ancilla, edge_ancilla };

/// Amplitude vector with the label of the space it lives in.
struct QuantumState {
  Eigen::VectorXcd amplitudes;
  SpaceTag space = SpaceTag::site;

  std::size_t dim() const { return static_cast<std::size_t>(amplitudes.size()); }
  double norm() const { return amplitudes.norm(); }
};

inline QuantumState qsample(std::span<const double> probs) {
  QuantumState s;
  s.amplitudes.resize(static_cast<Eigen::Index>(probs.size()));
  for (std::size_t x = 0; x < probs.size(); ++x) {
    if (probs[x] < 0.0) throw DomainError("probabilities must be nonnegative");
    s.amplitudes(static_cast<Eigen::Index>(x)) = std::sqrt(probs[x]);
  }
  return s;
}

inline QuantumState qsample(const GibbsDistribution& g) { return qsample(g.probs); }

inline cplx inner(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) { return a.dot(b); }

/// |<a|b>|^2.
inline double fidelity(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) { return std::norm(a.dot(b)); }
inline double fidelity(const QuantumState& a, const QuantumState& b) { return fidelity(a.amplitudes, b.amplitudes); }

/// 2-norm distance after aligning the global phase of b to a.
inline double phase_aligned_distance(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  const cplx ov = b.dot(a);
  const cplx phase = std::abs(ov) > 0 ? ov / std::abs(ov) : cplx(1.0);
  return (a - phase * b).norm();
}

/// Fejer kernel: probability that an s-bit phase estimate of phase phi reads 0.
inline double zero_outcome_probability(double phi, int bits) {
  const double n = std::ldexp(1.0, bits);
  const double den = std::sin(phi / 2.0);
  if (std::abs(den) < 1e-300) return 1.0;
  const double num = std::sin(n * phi / 2.0);
  return std::min(1.0, (num * num) / (n * n * den * den));
}

enum class ReflectionMode { exact, approximate };

/// Reflection-like unitary on a working space together with the two-outcome
/// measurement it induces ("landed on the target" vs. not).
///
/// Forms: rank-one 2|t><t| - I, diagonal projector 2P - I, spectral
/// sum_j mu_j |u_j><u_j| over a real orthonormal basis, and dense.
class ReflectionOperator {
 public:
  enum class Form { rank_one, projector, spectral, dense };

  static ReflectionOperator exact(Eigen::VectorXcd target, std::uint64_t walk_steps_per_use = 0) {
    ReflectionOperator r;
    r.form_ = Form::rank_one;
    r.mode_ = ReflectionMode::exact;
    const double n = target.norm();
    if (!(n > 0.0)) throw DomainError("reflection target must be nonzero");
    r.target_ = target / n;
    r.dim_ = static_cast<std::size_t>(target.size());
    r.steps_ = walk_steps_per_use;
    return r;
  }

  static ReflectionOperator projector(std::vector<char> mask) {
    ReflectionOperator r;
    r.form_ = Form::projector;
    r.mode_ = ReflectionMode::exact;
    r.dim_ = mask.size();
    r.mask_ = std::move(mask);
    return r;
  }

  static ReflectionOperator spectral(Eigen::MatrixXd basis, Eigen::VectorXcd multipliers, Eigen::VectorXd kraus,
                                     int k, int bits, std::uint64_t walk_steps_per_use) {
    ReflectionOperator r;
    r.form_ = Form::spectral;
    r.mode_ = ReflectionMode::approximate;
    r.dim_ = static_cast<std::size_t>(basis.rows());
    r.target_ = basis.col(0).cast<cplx>();
    r.basis_ = std::move(basis);
    r.mult_ = std::move(multipliers);
    r.kraus_ = std::move(kraus);
    r.k_ = k;
    r.bits_ = bits;
    r.steps_ = walk_steps_per_use;
    return r;
  }

  static ReflectionOperator dense(Eigen::MatrixXcd action, Eigen::MatrixXcd accept, Eigen::MatrixXcd reject,
                                  Eigen::VectorXcd target, ReflectionMode mode, int k, int bits,
                                  std::uint64_t walk_steps_per_use) {
    ReflectionOperator r;
    r.form_ = Form::dense;
    r.mode_ = mode;
    r.dim_ = static_cast<std::size_t>(action.rows());
    r.action_ = std::move(action);
    r.accept_ = std::move(accept);
    r.reject_ = std::move(reject);
    r.target_ = std::move(target);
    r.k_ = k;
    r.bits_ = bits;
    r.steps_ = walk_steps_per_use;
    return r;
  }

  Form form() const { return form_; }
  ReflectionMode mode() const { return mode_; }
  int k() const { return k_; }
  int precision_bits() const { return bits_; }
  std::size_t dim() const { return dim_; }
  bool has_target() const { return target_.size() > 0; }
  const Eigen::VectorXcd& target() const { return target_; }
  const std::vector<char>& mask() const { return mask_; }
  std::uint64_t walk_steps_per_use() const { return steps_; }

  /// True when the action is exactly 2P - I for an orthogonal projector P.
  bool is_exact_involution() const { return mode_ == ReflectionMode::exact; }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const {
    check(v);
    switch (form_) {
      case Form::rank_one: return 2.0 * target_.dot(v) * target_ - v;
      case Form::projector: {
        Eigen::VectorXcd out = v;
        for (std::size_t i = 0; i < dim_; ++i)
          if (!mask_[i]) out(static_cast<Eigen::Index>(i)) = -out(static_cast<Eigen::Index>(i));
        return out;
      }
      case Form::spectral: {
        Eigen::VectorXcd c = basis_.transpose().cast<cplx>() * v;
        return basis_.cast<cplx>() * mult_.cwiseProduct(c);
      }
      case Form::dense: return action_ * v;
    }
    return v;
  }

  /// Kraus operator of the accepting outcome applied to v.
  Eigen::VectorXcd accept(const Eigen::VectorXcd& v) const {
    check(v);
    switch (form_) {
      case Form::rank_one: return target_.dot(v) * target_;
      case Form::projector: {
        Eigen::VectorXcd out = v;
        for (std::size_t i = 0; i < dim_; ++i)
          if (!mask_[i]) out(static_cast<Eigen::Index>(i)) = 0.0;
        return out;
      }
      case Form::spectral: {
        Eigen::VectorXcd c = basis_.transpose().cast<cplx>() * v;
        return basis_.cast<cplx>() * kraus_.cast<cplx>().cwiseProduct(c);
      }
      case Form::dense: return accept_ * v;
    }
    return v;
  }

  /// Kraus operator of the rejecting outcome applied to v.
  Eigen::VectorXcd reject(const Eigen::VectorXcd& v) const {
    check(v);
    switch (form_) {
      case Form::rank_one:
      case Form::projector: return v - accept(v);
      case Form::spectral: {
        Eigen::VectorXcd c = basis_.transpose().cast<cplx>() * v;
        Eigen::VectorXd r = (1.0 - kraus_.array().square()).max(0.0).sqrt();
        return basis_.cast<cplx>() * r.cast<cplx>().cwiseProduct(c);
      }
      case Form::dense: return reject_ * v;
    }
    return v;
  }

  Eigen::MatrixXcd matrix() const {
    const auto n = static_cast<Eigen::Index>(dim_);
    if (form_ == Form::dense) return action_;
    Eigen::MatrixXcd m(n, n);
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      e(i) = 1.0;
      m.col(i) = apply(e);
      e(i) = 0.0;
    }
    return m;
  }

  /// Conjugates by the ancilla rotation A|x,0> = sqrt(1-w)|x,0> + sqrt(w)|x,1>.
  ///
  /// The result acts on site (x) ancilla with index 2x + b and equals
  /// A (R (x) |0><0| - I (x) |1><1|) A^dagger; for an exact rank-one R this is
  /// again the rank-one reflection about A(t (x) |0>).
  ReflectionOperator with_ancilla_encoding(std::span<const double> w) const;

 private:
  void check(const Eigen::VectorXcd& v) const {
    if (static_cast<std::size_t>(v.size()) != dim_) throw DomainError("state and reflection act on different spaces");
  }

  Form form_ = Form::rank_one;
  ReflectionMode mode_ = ReflectionMode::exact;
  std::size_t dim_ = 0;
  int k_ = 0;
  int bits_ = 0;
  std::uint64_t steps_ = 0;
  Eigen::VectorXcd target_;
  std::vector<char> mask_;
  Eigen::MatrixXd basis_;
  Eigen::VectorXcd mult_;
  Eigen::VectorXd kraus_;
  Eigen::MatrixXcd action_, accept_, reject_;
};

/// Block-diagonal ancilla rotation matrix for the encoding above.
inline Eigen::MatrixXcd ancilla_rotation(std::span<const double> w) {
  const auto n = static_cast<Eigen::Index>(w.size());
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
  for (Eigen::Index x = 0; x < n; ++x) {
    const double wx = std::clamp(w[x], 0.0, 1.0);
    const double s = std::sqrt(wx), c = std::sqrt(1.0 - wx);
    A(2 * x, 2 * x) = c;
    A(2 * x + 1, 2 * x) = s;
    A(2 * x, 2 * x + 1) = -s;
    A(2 * x + 1, 2 * x + 1) = c;
  }
  return A;
}

/// A (v (x) |0>).
inline Eigen::VectorXcd encode_with_ancilla(const Eigen::VectorXcd& v, std::span<const double> w) {
  const auto n = v.size();
  Eigen::VectorXcd out(2 * n);
  for (Eigen::Index x = 0; x < n; ++x) {
    const double wx = std::clamp(w[x], 0.0, 1.0);
    out(2 * x) = std::sqrt(1.0 - wx) * v(x);
    out(2 * x + 1) = std::sqrt(wx) * v(x);
  }
  return out;
}

/// A^dagger applied, then the ancilla-0 block extracted.
inline Eigen::VectorXcd decode_ancilla(const Eigen::VectorXcd& v, std::span<const double> w) {
  const auto n = v.size() / 2;
  Eigen::VectorXcd out(n);
  for (Eigen::Index x = 0; x < n; ++x) {
    const double wx = std::clamp(w[x], 0.0, 1.0);
    out(x) = std::sqrt(1.0 - wx) * v(2 * x) + std::sqrt(wx) * v(2 * x + 1);
  }
  return out;
}

inline ReflectionOperator ReflectionOperator::with_ancilla_encoding(std::span<const double> w) const {
  if (w.size() != dim_) throw DomainError("encoding weights do not match the reflection's space");
  if (form_ == Form::rank_one) return exact(encode_with_ancilla(target_, w), steps_);
  const auto n = static_cast<Eigen::Index>(dim_);
  const Eigen::MatrixXcd A = ancilla_rotation(w);
  const Eigen::MatrixXcd R = matrix();
  Eigen::MatrixXcd K(n, n), F(n, n);
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    e(i) = 1.0;
    K.col(i) = accept(e);
    F.col(i) = reject(e);
    e(i) = 0.0;
  }
  Eigen::MatrixXcd inner_r = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
  Eigen::MatrixXcd inner_k = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
  Eigen::MatrixXcd inner_f = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y < n; ++y) {
      inner_r(2 * x, 2 * y) = R(x, y);
      inner_k(2 * x, 2 * y) = K(x, y);
      inner_f(2 * x, 2 * y) = F(x, y);
    }
    inner_r(2 * x + 1, 2 * x + 1) = -1.0;
    inner_f(2 * x + 1, 2 * x + 1) = 1.0;
  }
  Eigen::VectorXcd t = has_target() ? encode_with_ancilla(target_, w) : Eigen::VectorXcd();
  return dense(A * inner_r * A.adjoint(), A * inner_k * A.adjoint(), A * inner_f * A.adjoint(), t, mode_, k_, bits_,
               steps_);
}

/// Result of mapping an edge-space state back to the site space.
struct ProjectionResult {
  QuantumState state;
  double residual_norm = 0.0;
  bool within_tolerance = true;
};

/// Szegedy walk W = R_B R_A of a reversible chain.
///
/// The edge space is the support {(x, y) : P(x, y) > 0}; W leaves it invariant
/// and is the identity on its complement. Site-level spectral data comes from
/// the chain; the dense unitary and its eigenphases are built on first use.
class WalkOperator {
 public:
  static constexpr std::size_t kDefaultMaxEdgeDim = 4096;

  explicit WalkOperator(const TransitionMatrix& chain, std::size_t max_edge_dim = kDefaultMaxEdgeDim)
      : max_edge_dim_(max_edge_dim), cache_(std::make_shared<Cache>()) {
    const auto n = static_cast<Eigen::Index>(chain.size());
    site_dim_ = chain.size();
    for (Eigen::Index x = 0; x < n; ++x)
      for (Eigen::Index y = 0; y < n; ++y)
        if (chain.probs(x, y) > 0.0) {
          edge_x_.push_back(static_cast<std::size_t>(x));
          edge_y_.push_back(static_cast<std::size_t>(y));
          sqrt_fwd_.push_back(std::sqrt(chain.probs(x, y)));
          sqrt_bwd_.push_back(std::sqrt(chain.probs(y, x)));
        }
    eigenvalues_ = chain.discriminant_eigenvalues;
    eigenvectors_ = chain.discriminant_eigenvectors;
    stationary_ = chain.stationary.probs;
    delta_ = chain.gap;
    phases_.resize(site_dim_);
    for (std::size_t j = 0; j < site_dim_; ++j)
      phases_[j] = 2.0 * std::acos(std::clamp(eigenvalues_(static_cast<Eigen::Index>(j)), -1.0, 1.0));
    phases_[0] = 0.0;
    phase_gap_ = std::numbers::pi;
    for (std::size_t j = 1; j < site_dim_; ++j) {
      const double phi = std::min(phases_[j], 2.0 * std::numbers::pi - phases_[j]);
      phase_gap_ = std::min(phase_gap_, phi);
    }
  }

  std::size_t site_dim() const { return site_dim_; }
  std::size_t edge_dim() const { return edge_x_.size(); }
  std::pair<std::size_t, std::size_t> edge(std::size_t e) const { return {edge_x_[e], edge_y_[e]}; }
  double chain_gap() const { return delta_; }
  double phase_gap() const { return phase_gap_; }
  const Eigen::VectorXd& site_eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXd& site_eigenvectors() const { return eigenvectors_; }
  /// Eigenphase 2 arccos(lambda_j) of W associated with discriminant eigenvector j.
  const std::vector<double>& site_phases() const { return phases_; }
  const std::vector<double>& stationary() const { return stationary_; }

  /// L v = sum_x v_x |x>|p_x>.
  Eigen::VectorXcd lift(const Eigen::VectorXcd& v) const {
    if (static_cast<std::size_t>(v.size()) != site_dim_) throw DomainError("site state has the wrong dimension");
    Eigen::VectorXcd out(static_cast<Eigen::Index>(edge_dim()));
    for (std::size_t e = 0; e < edge_dim(); ++e) out(static_cast<Eigen::Index>(e)) = v(static_cast<Eigen::Index>(edge_x_[e])) * sqrt_fwd_[e];
    return out;
  }

  /// L^dagger w.
  Eigen::VectorXcd lift_adjoint(const Eigen::VectorXcd& w) const {
    if (static_cast<std::size_t>(w.size()) != edge_dim()) throw DomainError("edge state has the wrong dimension");
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(site_dim_));
    for (std::size_t e = 0; e < edge_dim(); ++e) out(static_cast<Eigen::Index>(edge_x_[e])) += sqrt_fwd_[e] * w(static_cast<Eigen::Index>(e));
    return out;
  }

  QuantumState stationary_edge_state() const {
    Eigen::VectorXcd root(static_cast<Eigen::Index>(site_dim_));
    for (std::size_t x = 0; x < site_dim_; ++x) root(static_cast<Eigen::Index>(x)) = std::sqrt(stationary_[x]);
    return {lift(root), SpaceTag::edge};
  }

  /// Dense real orthogonal matrix of W on the edge space.
  const Eigen::MatrixXd& unitary() const {
    std::call_once(cache_->unitary_once, [this] { build_unitary(); });
    return cache_->unitary;
  }

  /// All eigenphases of W in (-pi, pi], sorted.
  const std::vector<double>& edge_eigenphases() const {
    std::call_once(cache_->phases_once, [this] {
      Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(unitary().cast<cplx>(), false);
      std::vector<double> out;
      for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(std::arg(es.eigenvalues()(i)));
      std::sort(out.begin(), out.end());
      cache_->edge_phases = std::move(out);
    });
    return cache_->edge_phases;
  }

  /// Apply W to an edge state without forming the dense matrix.
  Eigen::VectorXcd apply(const Eigen::VectorXcd& w) const {
    Eigen::VectorXcd a = 2.0 * lift(lift_adjoint(w)) - w;
    return 2.0 * b_map(b_adjoint(a)) - a;
  }

 private:
  struct Cache {
    std::once_flag unitary_once, phases_once;
    Eigen::MatrixXd unitary;
    std::vector<double> edge_phases;
  };

  // K e_y = sum_x sqrt(P(y, x)) |x, y>.
  Eigen::VectorXcd b_map(const Eigen::VectorXcd& v) const {
    Eigen::VectorXcd out(static_cast<Eigen::Index>(edge_dim()));
    for (std::size_t e = 0; e < edge_dim(); ++e) out(static_cast<Eigen::Index>(e)) = v(static_cast<Eigen::Index>(edge_y_[e])) * sqrt_bwd_[e];
    return out;
  }
  Eigen::VectorXcd b_adjoint(const Eigen::VectorXcd& w) const {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(site_dim_));
    for (std::size_t e = 0; e < edge_dim(); ++e) out(static_cast<Eigen::Index>(edge_y_[e])) += sqrt_bwd_[e] * w(static_cast<Eigen::Index>(e));
    return out;
  }

  void build_unitary() const {
    const auto m = static_cast<Eigen::Index>(edge_dim());
    if (edge_dim() > max_edge_dim_)
      throw CapacityError("walk edge space of dimension " + std::to_string(edge_dim()) + " exceeds the cap");
    const auto n = static_cast<Eigen::Index>(site_dim_);
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, n), K = Eigen::MatrixXd::Zero(m, n);
    for (std::size_t e = 0; e < edge_dim(); ++e) {
      L(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(edge_x_[e])) = sqrt_fwd_[e];
      K(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(edge_y_[e])) = sqrt_bwd_[e];
    }
    const Eigen::MatrixXd KtL = K.transpose() * L;
    cache_->unitary = 4.0 * K * KtL * L.transpose() - 2.0 * K * K.transpose() - 2.0 * L * L.transpose() +
                      Eigen::MatrixXd::Identity(m, m);
  }

  std::size_t max_edge_dim_;
  std::size_t site_dim_ = 0;
  std::vector<std::size_t> edge_x_, edge_y_;
  std::vector<double> sqrt_fwd_, sqrt_bwd_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
  std::vector<double> stationary_;
  std::vector<double> phases_;
  double delta_ = 0.0;
  double phase_gap_ = 0.0;
  std::shared_ptr<Cache> cache_;
};

/// Walk with an eager capacity check on the edge space.
inline WalkOperator build_walk(const TransitionMatrix& chain,
                               std::size_t max_edge_dim = WalkOperator::kDefaultMaxEdgeDim) {
  WalkOperator w(chain, max_edge_dim);
  if (w.edge_dim() > max_edge_dim)
    throw CapacityError("walk edge space of dimension " + std::to_string(w.edge_dim()) + " exceeds the cap");
  return w;
}

inline QuantumState lift_to_edge(const QuantumState& s, const WalkOperator& walk) {
  if (s.space != SpaceTag::site) throw DomainError("lift expects a site-space state");
  return {walk.lift(s.amplitudes), SpaceTag::edge};
}

/// L^dagger w, renormalized only when w lies in the lifted subspace up to 1e-6.
inline ProjectionResult project_to_site(const QuantumState& s, const WalkOperator& walk) {
  if (s.space != SpaceTag::edge) throw DomainError("project expects an edge-space state");
  ProjectionResult r;
  Eigen::VectorXcd v = walk.lift_adjoint(s.amplitudes);
  r.residual_norm = (s.amplitudes - walk.lift(v)).norm();
  r.within_tolerance = r.residual_norm <= 1e-6;
  if (r.within_tolerance && v.norm() > 0.0) v /= v.norm();
  r.state = {v, SpaceTag::site};
  return r;
}

/// Phase-estimation bits used by the approximate reflection: 2^s >= 2 pi / gap.
inline int reflection_precision_bits(double phase_gap) {
  if (!(phase_gap > 0.0)) throw ContractViolation("walk has zero phase gap (chain not ergodic)");
  return std::max(1, static_cast<int>(std::ceil(std::log2(2.0 * std::numbers::pi / phase_gap) - 1e-12)));
}

/// Walk steps charged per reflection use: k * ceil(1 / phase_gap).
inline std::uint64_t reflection_walk_cost(double phase_gap, int k) {
  return static_cast<std::uint64_t>(std::max(k, 1)) * static_cast<std::uint64_t>(std::ceil(1.0 / phase_gap - 1e-12));
}

/// Reflection about the walk's qsample, acting on the site space.
///
/// Exact mode returns 2|pi><pi| - I. Approximate mode models k repetitions
/// of s-bit phase estimation on W: a non-stationary eigenvector with phase
/// phi passes all k zero tests with amplitude p0(phi)^{k/2}, and the
/// reflection multiplies it by -exp(2i asin(p0^{k/2})), so that
/// ||(R~ + I) v|| = 2 p0^{k/2} <= 2^{1-k}.
inline ReflectionOperator reflection(const WalkOperator& walk, ReflectionMode mode, int k) {
  const std::uint64_t cost = reflection_walk_cost(walk.phase_gap(), k);
  const auto& U = walk.site_eigenvectors();
  if (mode == ReflectionMode::exact) return ReflectionOperator::exact(U.col(0).cast<cplx>(), cost);
  if (k < 1) throw DomainError("approximate reflection needs k >= 1");
  const int bits = reflection_precision_bits(walk.phase_gap());
  const auto n = static_cast<Eigen::Index>(walk.site_dim());
  Eigen::VectorXcd mult(n);
  Eigen::VectorXd kraus(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double p0 = j == 0 ? 1.0 : zero_outcome_probability(walk.site_phases()[static_cast<std::size_t>(j)], bits);
    const double eps = std::pow(p0, 0.5 * k);
    kraus(j) = eps;
    mult(j) = j == 0 ? cplx(1.0) : -std::exp(cplx(0.0, 2.0 * std::asin(std::min(eps, 1.0))));
  }
  return ReflectionOperator::spectral(U, mult, kraus, k, bits, cost);
}

/// max over the given orthocomplement vectors of ||(R + I) v||, for unit v.
inline double orthocomplement_error(const ReflectionOperator& r, const Eigen::MatrixXcd& vectors) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::VectorXcd v = vectors.col(j);
    v.normalize();
    worst = std::max(worst, (r.apply(v) + v).norm());
  }
  return worst;
}

/// Orthonormal basis of the complement of the walk's qsample (its other eigenvectors).
inline Eigen::MatrixXcd orthocomplement_basis(const WalkOperator& walk) {
  const auto& U = walk.site_eigenvectors();
  return U.rightCols(U.cols() - 1).cast<cplx>();
}

/// Eigenphase histogram rows (bin_left, bin_right, count) for CSV dumps.
inline void write_phase_histogram(std::ostream& os, const std::vector<double>& phases, int bins) {
  os << "bin_left,bin_right,count\n";
  const double lo = -std::numbers::pi, width = 2.0 * std::numbers::pi / bins;
  std::vector<int> counts(static_cast<std::size_t>(bins), 0);
  for (double p : phases) {
    int b = static_cast<int>((p - lo) / width);
    counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))]++;
  }
  os.precision(17);
  for (int b = 0; b < bins; ++b) os << lo + b * width << ',' << lo + (b + 1) * width << ',' << counts[b] << '\n';
}

}  // namespace qsalab
