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

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qsalab/errors.hpp"
#include "qsalab/pipeline.hpp"
#include "qsalab/problem.hpp"
#include "qsalab/schedule.hpp"

namespace qsalab {

using nlohmann::json;

/// Finite betas as numbers, inf as the string "inf".
inline json beta_to_json(Beta b) { return b.is_infinite() ? json("inf") : json(b.value()); }

inline Beta beta_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return Beta::infinity();
    throw ParseError("beta must be a number or \"inf\"");
  }
  if (!j.is_number()) throw ParseError("beta must be a number or \"inf\"");
  return Beta(j.get<double>());
}

/// NaN has no JSON form; it is written as null.
inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double number_from_json(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

inline json to_json(const ProbeRecord& r) {
  return {{"beta", r.beta},         {"a_hat", r.a_hat}, {"y_median", r.y_median},         {"M", r.M},
          {"q", r.q},               {"eta", r.eta},     {"accepted", r.accepted}, {"restore_rounds", r.restore_rounds}};
}

inline json to_json(const PairCertificate& c) {
  json probes = json::array();
  for (const auto& p : c.transcript) probes.push_back(to_json(p));
  return {{"from", beta_to_json(c.from)},
          {"to", beta_to_json(c.to)},
          {"overlap_estimate", number_or_null(c.overlap_estimate)},
          {"inherited", c.inherited},
          {"fallback", c.fallback},
          {"probes", std::move(probes)}};
}

inline json to_json(const Schedule& s) {
  json betas = json::array();
  for (Beta b : s.betas) betas.push_back(beta_to_json(b));
  json certs = json::array();
  for (const auto& c : s.certificates) certs.push_back(to_json(c));
  return {{"mode", to_string(s.mode)},
          {"gamma", number_or_null(s.gamma)},
          {"length", s.length()},
          {"outer_steps", s.outer_steps},
          {"length_bound", number_or_null(s.length_bound)},
          {"betas", std::move(betas)},
          {"certificates", std::move(certs)}};
}

inline ScheduleMode parse_schedule_mode(const std::string& s) {
  if (s == "bayes") return ScheduleMode::bayes;
  if (s == "counting") return ScheduleMode::counting;
  if (s == "nonadaptive") return ScheduleMode::nonadaptive;
  if (s == "oracle_greedy") return ScheduleMode::oracle_greedy;
  throw ParseError("unknown schedule mode: " + s);
}

/// Reads the betas (and mode, when present) of a schedule file.
inline Schedule schedule_from_json(const json& j) {
  try {
    Schedule s;
    if (j.contains("mode")) s.mode = parse_schedule_mode(j.at("mode").get<std::string>());
    for (const auto& b : j.at("betas")) s.betas.push_back(beta_from_json(b));
    if (j.contains("gamma")) s.gamma = number_from_json(j.at("gamma"));
    if (j.contains("length_bound")) s.length_bound = number_from_json(j.at("length_bound"));
    if (j.contains("outer_steps")) s.outer_steps = j.at("outer_steps").get<int>();
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("schedule file: ") + e.what());
  } catch (const DomainError& e) {
    throw ParseError(std::string("schedule file: ") + e.what());
  }
}

inline json to_json(const RatioEstimate& r) {
  const auto& t = r.transcript;
  return {{"index", r.index},
          {"from", beta_to_json(r.from)},
          {"to", beta_to_json(r.to)},
          {"w_hat", r.w_hat},
          {"log_factor", r.log_factor},
          {"epsilon", r.epsilon},
          {"M", t.M},
          {"q", t.q},
          {"eta", t.eta},
          {"y_median", t.y_median},
          {"restore_rounds", t.restore_rounds}};
}

inline json to_json(const EstimationReport& r) {
  json ratios = json::array();
  for (const auto& x : r.ratios) ratios.push_back(to_json(x));
  json betas = json::array();
  for (Beta b : r.schedule.betas) betas.push_back(beta_to_json(b));
  return {{"mode", r.mode},
          {"z_hat", number_or_null(r.z_hat)},
          {"log_z_hat", number_or_null(r.log_z_hat)},
          {"schedule", std::move(betas)},
          {"ratios", std::move(ratios)},
          {"cost", to_json(r.cost)},
          {"seed", r.seed},
          {"instance_digest", r.instance_digest}};
}

inline json to_json(const PairCheck& c) {
  return {{"from", beta_to_json(c.from)},
          {"to", beta_to_json(c.to)},
          {"chebyshev", c.chebyshev},
          {"slow_varying", c.slow_varying},
          {"overlap", c.overlap},
          {"chebyshev_ok", c.chebyshev_ok},
          {"slow_varying_ok", c.slow_varying_ok},
          {"implication_ok", c.implication_ok}};
}

inline json to_json(const VerifyReport& v) {
  json pairs = json::array();
  for (const auto& p : v.pairs) pairs.push_back(to_json(p));
  return {{"B", v.B},
          {"ok", v.ok()},
          {"increasing", v.increasing},
          {"all_chebyshev", v.all_chebyshev},
          {"all_slow_varying", v.all_slow_varying},
          {"all_implications", v.all_implications},
          {"pairs", std::move(pairs)}};
}

inline json to_json(const RunParams& p) {
  return {{"B", p.B},   {"p", p.p},   {"epsilon", p.epsilon}, {"eta", p.eta},
          {"M", p.M},   {"k", p.k},   {"pilot_M", p.pilot_M}, {"max_M", p.max_M},
          {"strict_stall", p.strict_stall}};
}

/// FNV-1a of a JSON document's canonical dump, as 16 hex digits.
inline std::string json_digest(const json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string csv_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string csv_beta(Beta b) { return b.is_infinite() ? "inf" : csv_number(b.value()); }

/// One row per adjacent pair: index, from, to, overlap estimate, flags.
inline void write_schedule_csv(std::ostream& os, const Schedule& s) {
  os << "index,from,to,overlap_estimate,inherited,fallback\n";
  for (std::size_t i = 0; i + 1 < s.betas.size(); ++i) {
    os << i << ',' << csv_beta(s.betas[i]) << ',' << csv_beta(s.betas[i + 1]) << ',';
    if (i < s.certificates.size()) {
      const auto& c = s.certificates[i];
      os << csv_number(c.overlap_estimate) << ',' << int{c.inherited} << ',' << int{c.fallback} << '\n';
    } else {
      os << "nan,0,0\n";
    }
  }
}

/// index, amplitude (real), oracle amplitude, grid point when available.
inline void write_amplitudes_csv(std::ostream& os, const ProblemInstance& inst, const Eigen::VectorXcd& state,
                                 const std::vector<double>& oracle_probs) {
  os << "index,theta,amplitude_re,amplitude_im,oracle_amplitude\n";
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    const auto x = static_cast<std::size_t>(i);
    const double theta = inst.kind() == ProblemKind::bayes ? inst.spec.grid[x] : kNaN;
    os << i << ',' << csv_number(theta) << ',' << csv_number(state(i).real()) << ',' << csv_number(state(i).imag())
       << ',' << csv_number(std::sqrt(oracle_probs[x])) << '\n';
  }
}

}  // namespace qsalab
