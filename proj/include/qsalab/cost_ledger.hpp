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

#include <cstdint>

#include "json.hpp"

namespace qsalab {

/// Model-cost accumulator. Merged with += at join points.
struct CostLedger {
  /// Walk steps consumed by the reflections actually simulated.
  std::uint64_t walk_steps = 0;
  /// Reflection uses (each application of a reflection or its measurement).
  std::uint64_t reflections = 0;
  /// Amplitude-estimation invocations.
  std::uint64_t ae_calls = 0;
  /// Projection rounds spent transferring qsamples between temperatures.
  std::uint64_t anneal_rounds = 0;
  /// Walk steps charged by the per-step annealing cost formula.
  double model_walk_steps = 0.0;

  void charge(std::uint64_t uses, std::uint64_t steps_per_use) {
    reflections += uses;
    walk_steps += uses * steps_per_use;
  }

  CostLedger& operator+=(const CostLedger& o) {
    walk_steps += o.walk_steps;
    reflections += o.reflections;
    ae_calls += o.ae_calls;
    anneal_rounds += o.anneal_rounds;
    model_walk_steps += o.model_walk_steps;
    return *this;
  }
};

inline CostLedger operator-(CostLedger a, const CostLedger& b) {
  a.walk_steps -= b.walk_steps;
  a.reflections -= b.reflections;
  a.ae_calls -= b.ae_calls;
  a.anneal_rounds -= b.anneal_rounds;
  a.model_walk_steps -= b.model_walk_steps;
  return a;
}

inline nlohmann::json to_json(const CostLedger& c) {
  return {{"walk_steps", c.walk_steps},
          {"reflections", c.reflections},
          {"ae_calls", c.ae_calls},
          {"anneal_rounds", c.anneal_rounds},
          {"model_walk_steps", c.model_walk_steps}};
}

}  // namespace qsalab
