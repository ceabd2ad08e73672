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
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qsalab/errors.hpp"

namespace qsalab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Numerically stable log(sum(exp(v))). Returns -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (m == -kInf) return -kInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// Inverse temperature. Infinity is a distinguished value used only as the
/// last point of counting schedules.
class Beta {
 public:
  constexpr Beta() = default;
  explicit Beta(double value) : value_(value) {
    if (std::isnan(value) || value < 0.0) throw DomainError("inverse temperature must be nonnegative");
  }
  static constexpr Beta infinity() {
    Beta b;
    b.value_ = kInf;
    return b;
  }
  bool is_infinite() const { return std::isinf(value_); }
  double value() const { return value_; }
  auto operator<=>(const Beta&) const = default;

 private:
  double value_ = 0.0;
};

inline std::string to_string(Beta b) {
  if (b.is_infinite()) return "inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", b.value());
  return buf;
}

enum class ProblemKind { coloring, ising, matching, independent_set, bayes };
enum class LikelihoodModel { bernoulli, gaussian };

inline std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::coloring: return "coloring";
    case ProblemKind::ising: return "ising";
    case ProblemKind::matching: return "matching";
    case ProblemKind::independent_set: return "independent_set";
    case ProblemKind::bayes: return "bayes";
  }
  return "?";
}

inline ProblemKind parse_kind(std::string_view s) {
  if (s == "coloring") return ProblemKind::coloring;
  if (s == "ising") return ProblemKind::ising;
  if (s == "matching") return ProblemKind::matching;
  if (s == "independent_set") return ProblemKind::independent_set;
  if (s == "bayes") return ProblemKind::bayes;
  throw ParseError("unknown problem kind '" + std::string(s) + "'");
}

inline bool is_counting(ProblemKind k) { return k != ProblemKind::bayes; }

struct Graph {
  int vertices = 0;
  std::vector<std::pair<int, int>> edges;
};

/// Parsed problem description, before enumeration.
struct ProblemSpec {
  ProblemKind kind = ProblemKind::coloring;
  Graph graph;
  int colors = 0;
  double fugacity = 1.0;
  std::vector<double> prior;
  std::vector<double> grid;
  std::vector<double> data;
  LikelihoodModel model = LikelihoodModel::bernoulli;
  double sigma = 1.0;
  std::optional<double> n_bound;

  static ProblemSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

inline ProblemSpec ProblemSpec::from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw ParseError("instance must be a JSON object");
    if (!j.contains("kind")) throw ParseError("instance is missing 'kind'");
    ProblemSpec s;
    s.kind = parse_kind(j.at("kind").get<std::string>());
    if (is_counting(s.kind)) {
      if (!j.contains("graph")) throw ParseError("counting instance is missing 'graph'");
      const auto& g = j.at("graph");
      s.graph.vertices = g.at("vertices").get<int>();
      if (s.graph.vertices < 1) throw ParseError("graph needs at least one vertex");
      if (g.contains("edges")) {
        for (const auto& e : g.at("edges")) {
          if (!e.is_array() || e.size() != 2) throw ParseError("edges must be [u, v] pairs");
          int u = e[0].get<int>();
          int v = e[1].get<int>();
          if (u < 0 || v < 0 || u >= s.graph.vertices || v >= s.graph.vertices)
            throw ParseError("edge endpoint out of range");
          if (u == v) throw ParseError("self-loop at vertex " + std::to_string(u));
          if (u > v) std::swap(u, v);
          for (const auto& prev : s.graph.edges)
            if (prev == std::make_pair(u, v)) throw ParseError("duplicate edge");
          s.graph.edges.emplace_back(u, v);
        }
      }
    }
    if (s.kind == ProblemKind::coloring) {
      if (!j.contains("k")) throw ParseError("coloring instance is missing 'k'");
      s.colors = j.at("k").get<int>();
      if (s.colors < 1) throw ParseError("color count k must be >= 1");
    }
    if (s.kind == ProblemKind::independent_set && j.contains("lambda")) {
      s.fugacity = j.at("lambda").get<double>();
      if (!(s.fugacity > 0.0) || !std::isfinite(s.fugacity)) throw ParseError("fugacity lambda must be positive");
    }
    if (s.kind == ProblemKind::bayes) {
      if (j.contains("prior")) s.prior = j.at("prior").get<std::vector<double>>();
      if (j.contains("grid")) s.grid = j.at("grid").get<std::vector<double>>();
      if (j.contains("data")) s.data = j.at("data").get<std::vector<double>>();
      if (j.contains("likelihood")) {
        const auto m = j.at("likelihood").get<std::string>();
        if (m == "bernoulli") s.model = LikelihoodModel::bernoulli;
        else if (m == "gaussian") s.model = LikelihoodModel::gaussian;
        else throw ParseError("unknown likelihood '" + m + "'");
      }
      if (j.contains("sigma")) s.sigma = j.at("sigma").get<double>();
      if (!(s.sigma > 0.0)) throw ParseError("sigma must be positive");
      if (s.prior.empty() && s.grid.empty()) throw ParseError("bayes instance needs 'prior' or 'grid'");
      if (s.grid.empty()) {
        const double g = static_cast<double>(s.prior.size());
        for (std::size_t i = 0; i < s.prior.size(); ++i) s.grid.push_back((static_cast<double>(i) + 0.5) / g);
      }
      if (s.prior.empty()) s.prior.assign(s.grid.size(), 1.0 / static_cast<double>(s.grid.size()));
      if (s.prior.size() != s.grid.size()) throw ParseError("prior and grid sizes differ");
      double total = 0.0;
      for (double w : s.prior) {
        if (!(w > 0.0)) throw ParseError("prior must be strictly positive");
        total += w;
      }
      if (std::abs(total - 1.0) > 1e-12) throw ParseError("prior must sum to 1");
      if (s.model == LikelihoodModel::bernoulli) {
        for (double th : s.grid)
          if (!(th > 0.0 && th < 1.0)) throw ParseError("bernoulli grid values must lie in (0, 1)");
        for (double x : s.data)
          if (x != 0.0 && x != 1.0) throw ParseError("bernoulli observations must be 0 or 1");
      }
    }
    if (j.contains("n_bound")) s.n_bound = j.at("n_bound").get<double>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed instance: ") + e.what());
  }
}

inline nlohmann::json ProblemSpec::to_json() const {
  nlohmann::json j;
  j["kind"] = qsalab::to_string(kind);
  if (is_counting(kind)) {
    nlohmann::json edges = nlohmann::json::array();
    for (auto [u, v] : graph.edges) edges.push_back({u, v});
    j["graph"] = {{"vertices", graph.vertices}, {"edges", edges}};
  }
  if (kind == ProblemKind::coloring) j["k"] = colors;
  if (kind == ProblemKind::independent_set) j["lambda"] = fugacity;
  if (kind == ProblemKind::bayes) {
    j["prior"] = prior;
    j["grid"] = grid;
    j["data"] = data;
    j["likelihood"] = model == LikelihoodModel::bernoulli ? "bernoulli" : "gaussian";
    if (model == LikelihoodModel::gaussian) j["sigma"] = sigma;
  }
  if (n_bound) j["n_bound"] = *n_bound;
  return j;
}

inline ProblemSpec parse_problem(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  return ProblemSpec::from_json(j);
}

using Configuration = std::vector<int>;

/// Default |Omega| cap, overridable through QSALAB_ENUM_CAP.
inline std::size_t default_enumeration_cap() {
  if (const char* env = std::getenv("QSALAB_ENUM_CAP")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    throw ParseError("QSALAB_ENUM_CAP must be a positive integer");
  }
  return 4096;
}

struct BuildOptions {
  std::size_t enumeration_cap = default_enumeration_cap();
};

/// Negative log-likelihood of the data at one parameter value.
inline double negative_log_likelihood(const ProblemSpec& s, double theta) {
  double nll = 0.0;
  for (double x : s.data) {
    if (s.model == LikelihoodModel::bernoulli) {
      nll -= x == 1.0 ? std::log(theta) : std::log1p(-theta);
    } else {
      const double z = (x - theta) / s.sigma;
      nll += 0.5 * z * z + std::log(s.sigma) + 0.5 * std::log(2.0 * 3.141592653589793);
    }
  }
  return nll;
}

/// Enumerated problem: state list, energies and base log-weights.
///
/// Gibbs weights are exp(log_weights[x] - beta * energies[x]). The reported
/// log Z adds beta * log_z_drift, which is nonzero only for reversed instances.
struct ProblemInstance {
  ProblemSpec spec;
  std::vector<Configuration> states;
  std::vector<double> energies;
  std::vector<double> log_weights;
  double n_bound = 0.0;
  double likelihood_offset = 0.0;
  double log_z_drift = 0.0;
  std::optional<double> reverse_gamma;
  /// proposals[x] = (y, q(x,y)) for the symmetric single-site proposal kernel, y != x.
  std::vector<std::vector<std::pair<std::size_t, double>>> proposals;
  std::map<Configuration, std::size_t> index;

  std::size_t size() const { return states.size(); }
  ProblemKind kind() const { return spec.kind; }
  bool is_reversed() const { return reverse_gamma.has_value(); }

  std::size_t index_of(const Configuration& x) const {
    auto it = index.find(x);
    if (it == index.end()) throw DomainError("configuration is not in the state space");
    return it->second;
  }

  double max_energy() const { return *std::max_element(energies.begin(), energies.end()); }

  /// FNV-1a digest of the canonical description.
  std::string digest() const {
    nlohmann::json j = spec.to_json();
    if (reverse_gamma) j["reverse_gamma"] = *reverse_gamma;
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

namespace detail {

inline bool is_matching(const Graph& g, const Configuration& x) {
  std::vector<int> used(static_cast<std::size_t>(g.vertices), 0);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (!x[e]) continue;
    auto [u, v] = g.edges[e];
    if (used[u]++ || used[v]++) return false;
  }
  return true;
}

inline bool is_independent(const Graph& g, const Configuration& x) {
  for (auto [u, v] : g.edges)
    if (x[u] && x[v]) return false;
  return true;
}

inline void check_cap(std::size_t count, std::size_t cap) {
  if (count > cap)
    throw CapacityError("state space exceeds enumeration cap of " + std::to_string(cap));
}

// Depth-first subset search; only valid prefixes are extended.
template <class Valid>
void enumerate_subsets(std::size_t length, Configuration& cur, std::size_t pos, const Valid& valid,
                       std::vector<Configuration>& out, std::size_t cap) {
  if (pos == length) {
    out.push_back(cur);
    check_cap(out.size(), cap);
    return;
  }
  cur[pos] = 0;
  enumerate_subsets(length, cur, pos + 1, valid, out, cap);
  cur[pos] = 1;
  if (valid(cur, pos)) enumerate_subsets(length, cur, pos + 1, valid, out, cap);
  cur[pos] = 0;
}

inline double raw_energy(const ProblemSpec& s, const Configuration& x) {
  switch (s.kind) {
    case ProblemKind::coloring: {
      double h = 0;
      for (auto [u, v] : s.graph.edges) h += x[u] == x[v];
      return h;
    }
    case ProblemKind::ising: {
      double h = 0;
      for (auto [u, v] : s.graph.edges) h += x[u] != x[v];
      return h;
    }
    case ProblemKind::matching:
    case ProblemKind::independent_set: {
      double h = 0;
      for (int b : x) h += b;
      return h;
    }
    case ProblemKind::bayes:
      return negative_log_likelihood(s, s.grid.at(static_cast<std::size_t>(x.at(0))));
  }
  return 0.0;
}

}  // namespace detail

/// Energy of a configuration, computed directly from the description.
///
/// Bayes energies include the offset that makes min L = 0; reversed instances
/// return n - H.
inline double energy(const ProblemInstance& inst, const Configuration& x) {
  const double raw = detail::raw_energy(inst.spec, x);
  if (inst.is_reversed()) return inst.n_bound - raw;
  return raw - inst.likelihood_offset;
}

inline ProblemInstance build_instance(const ProblemSpec& spec, const BuildOptions& opts = {}) {
  ProblemInstance inst;
  inst.spec = spec;
  const Graph& g = spec.graph;
  const std::size_t cap = opts.enumeration_cap;
  auto& states = inst.states;

  switch (spec.kind) {
    case ProblemKind::coloring:
    case ProblemKind::ising: {
      const int q = spec.kind == ProblemKind::coloring ? spec.colors : 2;
      const double count = std::pow(static_cast<double>(q), g.vertices);
      if (count > static_cast<double>(cap))
        throw CapacityError("state space exceeds enumeration cap of " + std::to_string(cap));
      Configuration x(static_cast<std::size_t>(g.vertices), 0);
      while (true) {
        states.push_back(x);
        int pos = g.vertices - 1;
        while (pos >= 0 && x[pos] == q - 1) x[pos--] = 0;
        if (pos < 0) break;
        ++x[pos];
      }
      break;
    }
    case ProblemKind::matching: {
      Configuration cur(g.edges.size(), 0);
      std::vector<Configuration> out;
      detail::enumerate_subsets(
          g.edges.size(), cur, 0, [&](const Configuration& c, std::size_t) { return detail::is_matching(g, c); },
          out, cap);
      states = std::move(out);
      break;
    }
    case ProblemKind::independent_set: {
      Configuration cur(static_cast<std::size_t>(g.vertices), 0);
      std::vector<Configuration> out;
      detail::enumerate_subsets(
          cur.size(), cur, 0,
          [&](const Configuration& c, std::size_t pos) {
            const int p = static_cast<int>(pos);
            for (auto [u, v] : g.edges)
              if ((u == p && c[v]) || (v == p && c[u])) return false;
            return true;
          },
          out, cap);
      states = std::move(out);
      break;
    }
    case ProblemKind::bayes: {
      detail::check_cap(spec.grid.size(), cap);
      for (std::size_t j = 0; j < spec.grid.size(); ++j) states.push_back({static_cast<int>(j)});
      break;
    }
  }

  for (std::size_t i = 0; i < states.size(); ++i) inst.index.emplace(states[i], i);

  inst.energies.resize(states.size());
  inst.log_weights.assign(states.size(), 0.0);
  for (std::size_t i = 0; i < states.size(); ++i) inst.energies[i] = detail::raw_energy(spec, states[i]);
  if (spec.kind == ProblemKind::bayes) {
    inst.likelihood_offset = *std::min_element(inst.energies.begin(), inst.energies.end());
    for (std::size_t i = 0; i < states.size(); ++i) {
      inst.energies[i] -= inst.likelihood_offset;
      inst.log_weights[i] = std::log(spec.prior[i]);
    }
  }
  if (spec.kind == ProblemKind::independent_set) {
    const double ll = std::log(spec.fugacity);
    for (std::size_t i = 0; i < states.size(); ++i) inst.log_weights[i] = inst.energies[i] * ll;
  }

  const double hmax = *std::max_element(inst.energies.begin(), inst.energies.end());
  inst.n_bound = spec.n_bound.value_or(hmax);
  if (inst.n_bound < hmax) throw ParseError("n_bound is below the maximum energy");

  // Symmetric proposal kernel of the single-site chain.
  inst.proposals.resize(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Configuration& x = states[i];
    auto& out = inst.proposals[i];
    auto add = [&](const Configuration& y, double q) {
      auto it = inst.index.find(y);
      if (it != inst.index.end()) out.emplace_back(it->second, q);
    };
    switch (spec.kind) {
      case ProblemKind::coloring: {
        const double q = 1.0 / (static_cast<double>(g.vertices) * spec.colors);
        for (int v = 0; v < g.vertices; ++v)
          for (int c = 0; c < spec.colors; ++c) {
            if (c == x[v]) continue;
            Configuration y = x;
            y[v] = c;
            add(y, q);
          }
        break;
      }
      case ProblemKind::ising:
      case ProblemKind::independent_set: {
        const double q = 1.0 / g.vertices;
        for (int v = 0; v < g.vertices; ++v) {
          Configuration y = x;
          y[v] = 1 - y[v];
          add(y, q);
        }
        break;
      }
      case ProblemKind::matching: {
        const double q = 1.0 / static_cast<double>(g.edges.size());
        for (std::size_t e = 0; e < g.edges.size(); ++e) {
          Configuration y = x;
          y[e] = 1 - y[e];
          add(y, q);
        }
        break;
      }
      case ProblemKind::bayes: {
        if (x[0] > 0) add({x[0] - 1}, 0.5);
        add({x[0] + 1}, 0.5);
        break;
      }
    }
  }
  return inst;
}

inline ProblemInstance build_instance(std::string_view json_text, const BuildOptions& opts = {}) {
  return build_instance(parse_problem(json_text), opts);
}

/// Gibbs distribution pi(x) proportional to exp(w(x) - beta H(x)).
struct GibbsDistribution {
  Beta beta;
  std::vector<double> probs;
  double log_z = 0.0;
};

inline GibbsDistribution gibbs(const ProblemInstance& inst, Beta beta) {
  GibbsDistribution g;
  g.beta = beta;
  const std::size_t n = inst.size();
  std::vector<double> lw(n);
  if (beta.is_infinite()) {
    if (inst.log_z_drift != 0.0) throw UnsupportedInstanceError("beta = inf is undefined for a reversed instance");
    for (std::size_t i = 0; i < n; ++i) lw[i] = inst.energies[i] == 0.0 ? inst.log_weights[i] : -kInf;
    g.log_z = log_sum_exp(lw);
    if (g.log_z == -kInf) throw UnsupportedInstanceError("ground set is empty, Z(inf) = 0");
  } else {
    const double b = beta.value();
    for (std::size_t i = 0; i < n; ++i) lw[i] = inst.log_weights[i] - b * inst.energies[i];
    g.log_z = log_sum_exp(lw);
  }
  g.probs.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += (g.probs[i] = std::exp(lw[i] - g.log_z));
  for (double& p : g.probs) p /= total;
  if (!beta.is_infinite()) g.log_z += beta.value() * inst.log_z_drift;
  return g;
}

/// Reversed instance for annealing backwards from the ground state.
///
/// Stores H'(x) = n - H(x) and base weight w(x) - gamma0 H(x), with a log Z drift
/// of +beta' n, so that Z'(beta') = Z(gamma0 - beta') while H' stays nonnegative.
inline ProblemInstance reverse_transform(const ProblemInstance& inst, double gamma0) {
  if (inst.kind() != ProblemKind::matching && inst.kind() != ProblemKind::independent_set)
    throw UnsupportedInstanceError("reverse annealing applies to matching and independent_set instances");
  if (inst.is_reversed()) throw UnsupportedInstanceError("instance is already reversed");
  if (!(gamma0 > 0.0) || !std::isfinite(gamma0)) throw DomainError("gamma0 must be positive and finite");
  ProblemInstance r = inst;
  r.reverse_gamma = gamma0;
  r.log_z_drift = inst.n_bound;
  for (std::size_t i = 0; i < r.size(); ++i) {
    r.log_weights[i] = inst.log_weights[i] - gamma0 * inst.energies[i];
    r.energies[i] = inst.n_bound - inst.energies[i];
  }
  return r;
}

}  // namespace qsalab
