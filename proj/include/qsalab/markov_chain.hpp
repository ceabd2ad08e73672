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
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "qsalab/errors.hpp"
#include "qsalab/problem.hpp"

namespace qsalab {

/// Reversible row-stochastic chain with its spectral data.
///
/// The discriminant D(x,y) = sqrt(P(x,y) P(y,x)) is diagonalized eagerly;
/// eigenvalues are stored in decreasing order and column 0 of the
/// eigenvector matrix is sqrt(pi).
struct TransitionMatrix {
  Beta beta;
  Eigen::MatrixXd probs;
  GibbsDistribution stationary;
  double gap = 0.0;
  Eigen::VectorXd discriminant_eigenvalues;
  Eigen::MatrixXd discriminant_eigenvectors;

  std::size_t size() const { return static_cast<std::size_t>(probs.rows()); }
  /// Second largest eigenvalue modulus.
  double slem() const { return 1.0 - gap; }
};

/// max |pi(x) P(x,y) - pi(y) P(y,x)|.
inline double detailed_balance_residual(const Eigen::MatrixXd& P, std::span<const double> pi) {
  double r = 0.0;
  for (Eigen::Index x = 0; x < P.rows(); ++x)
    for (Eigen::Index y = x + 1; y < P.cols(); ++y) r = std::max(r, std::abs(pi[x] * P(x, y) - pi[y] * P(y, x)));
  return r;
}

namespace detail {

inline void finish_chain(TransitionMatrix& c) {
  const Eigen::Index n = c.probs.rows();
  const auto& pi = c.stationary.probs;
  const double tol = 1e-12;
  for (Eigen::Index x = 0; x < n; ++x) {
    if (std::abs(c.probs.row(x).sum() - 1.0) > 1e-10) throw ContractViolation("rows must sum to 1");
    if ((c.probs.row(x).array() < 0.0).any()) throw ContractViolation("negative transition probability");
  }
  if (detailed_balance_residual(c.probs, pi) > tol * std::max(1.0, c.probs.cwiseAbs().maxCoeff()))
    throw ContractViolation("chain is not reversible with respect to its stationary distribution");

  Eigen::MatrixXd D(n, n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y) D(x, y) = std::sqrt(c.probs(x, y) * c.probs(y, x));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
  if (es.info() != Eigen::Success) throw ContractViolation("discriminant eigensolve failed");
  c.discriminant_eigenvalues = es.eigenvalues().reverse();
  c.discriminant_eigenvectors = es.eigenvectors().rowwise().reverse();

  // Pin the top eigenvector to sqrt(pi); its eigenvalue is exactly 1.
  Eigen::VectorXd root(n);
  for (Eigen::Index x = 0; x < n; ++x) root(x) = std::sqrt(pi[x]);
  c.discriminant_eigenvalues(0) = 1.0;
  c.discriminant_eigenvectors.col(0) = root;
  for (Eigen::Index j = 1; j < n; ++j) {
    auto col = c.discriminant_eigenvectors.col(j);
    col -= root.dot(col) * root;
    col.normalize();
  }

  double slem = 0.0;
  for (Eigen::Index j = 1; j < n; ++j) slem = std::max(slem, std::abs(c.discriminant_eigenvalues(j)));
  c.gap = n == 1 ? 1.0 : 1.0 - std::min(slem, 1.0);
}

}  // namespace detail

/// Lazy single-site Metropolis chain reversible with respect to gibbs(inst, beta).
inline TransitionMatrix build_chain(const ProblemInstance& inst, Beta beta) {
  if (beta.is_infinite()) throw DomainError("chains are defined for finite beta only");
  TransitionMatrix c;
  c.beta = beta;
  c.stationary = gibbs(inst, beta);
  const std::size_t n = inst.size();
  const double b = beta.value();
  c.probs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t x = 0; x < n; ++x) {
    double out = 0.0;
    for (auto [y, q] : inst.proposals[x]) {
      const double log_ratio =
          (inst.log_weights[y] - inst.log_weights[x]) - b * (inst.energies[y] - inst.energies[x]);
      const double accept = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
      const double p = 0.5 * q * accept;
      c.probs(x, y) += p;
      out += p;
    }
    c.probs(x, x) = 1.0 - out;
  }
  detail::finish_chain(c);
  return c;
}

/// Wraps an explicit matrix with a claimed stationary distribution.
inline TransitionMatrix chain_from_matrix(const Eigen::MatrixXd& P, std::vector<double> stationary) {
  if (P.rows() != P.cols() || static_cast<std::size_t>(P.rows()) != stationary.size())
    throw DomainError("matrix and distribution sizes differ");
  TransitionMatrix c;
  c.probs = P;
  c.stationary.probs = std::move(stationary);
  detail::finish_chain(c);
  return c;
}

inline double spectral_gap(const TransitionMatrix& chain) { return chain.gap; }

/// nu0 P^t.
inline std::vector<double> classical_mix(const TransitionMatrix& chain, std::span<const double> nu0, int t) {
  if (t < 0) throw DomainError("step count must be nonnegative");
  if (nu0.size() != chain.size()) throw DomainError("distribution size does not match the chain");
  Eigen::RowVectorXd v = Eigen::Map<const Eigen::RowVectorXd>(nu0.data(), static_cast<Eigen::Index>(nu0.size()));
  for (int s = 0; s < t; ++s) v = v * chain.probs;
  return {v.data(), v.data() + v.size()};
}

/// Diagnostic JSON; the matrix itself is omitted above the size threshold.
inline nlohmann::json chain_diagnostics(const TransitionMatrix& chain, std::size_t matrix_threshold = 64) {
  nlohmann::json j;
  j["beta"] = to_string(chain.beta);
  j["size"] = chain.size();
  j["gap"] = chain.gap;
  j["stationary"] = chain.stationary.probs;
  j["eigenvalues"] = std::vector<double>(chain.discriminant_eigenvalues.data(),
                                         chain.discriminant_eigenvalues.data() + chain.discriminant_eigenvalues.size());
  if (chain.size() <= matrix_threshold) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index x = 0; x < chain.probs.rows(); ++x) {
      std::vector<double> row(chain.probs.cols());
      for (Eigen::Index y = 0; y < chain.probs.cols(); ++y) row[y] = chain.probs(x, y);
      rows.push_back(row);
    }
    j["matrix"] = rows;
  }
  return j;
}

}  // namespace qsalab
