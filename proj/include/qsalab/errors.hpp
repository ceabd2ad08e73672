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

#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qsalab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed instance description or configuration.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// State space or edge space above the configured enumeration cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The instance does not support the requested operation.
class UnsupportedInstanceError : public Error {
 public:
  using Error::Error;
};

/// A precondition the caller promised (reversibility, convexity, ...) is false.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Adaptive search found no admissible next inverse temperature.
class ScheduleStallError : public Error {
 public:
  ScheduleStallError(const std::string& what, std::vector<double> partial)
      : Error(what), partial_schedule(std::move(partial)) {}
  std::vector<double> partial_schedule;
};

/// Restoration loop exhausted its iteration cap.
class RestorationFailedError : public Error {
 public:
  RestorationFailedError(const std::string& what, std::vector<std::complex<double>> residual)
      : Error(what), residual_state(std::move(residual)) {}
  std::vector<std::complex<double>> residual_state;
};

/// Projection-based state transfer exhausted its round cap.
class AnnealFailureError : public Error {
 public:
  AnnealFailureError(const std::string& what, int rounds) : Error(what), rounds_used(rounds) {}
  int rounds_used;
};

/// A ratio estimate came out as zero, so the telescoping product is undefined.
class DegenerateRatioError : public Error {
 public:
  using Error::Error;
};

}  // namespace qsalab
