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
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qsalab.hpp"

namespace qsalab::testing {

inline std::string read_instance_text(const std::string& name) {
  std::ifstream in(std::string(QSALAB_DATA_DIR) + "/" + name + ".json");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ProblemInstance load(const std::string& name) { return build_instance(read_instance_text(name)); }

inline std::string graph_json(const char* kind, int n, const std::vector<std::pair<int, int>>& edges,
                              const std::string& extra = "") {
  std::string s = std::string("{\"kind\": \"") + kind + "\", \"graph\": {\"vertices\": " + std::to_string(n) +
                  ", \"edges\": [";
  for (std::size_t i = 0; i < edges.size(); ++i)
    s += (i ? ", [" : "[") + std::to_string(edges[i].first) + ", " + std::to_string(edges[i].second) + "]";
  return s + "]}" + extra + "}";
}

inline const std::vector<std::string>& bundled_names() {
  static const std::vector<std::string> names = {"k3_coloring", "p4_coloring",        "ising4_cycle", "ising1",
                                                 "k3_matching", "k3_independent_set", "coin16_n10",   "coin16_n40",
                                                 "coin16_n160", "coin16_empty"};
  return names;
}

/// log Z(beta) summed naively in linear space (independent of the library's log-sum-exp).
inline double naive_log_z(const ProblemInstance& inst, double beta) {
  double z = 0.0;
  for (std::size_t x = 0; x < inst.size(); ++x) z += std::exp(inst.log_weights[x] - beta * inst.energies[x]);
  return std::log(z) + beta * inst.log_z_drift;
}

inline Eigen::VectorXcd random_unit(std::size_t n, Rng& rng) {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = cplx(rng.normal(), rng.normal());
  return v / v.norm();
}

}  // namespace qsalab::testing
