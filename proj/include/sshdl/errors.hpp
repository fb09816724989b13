// Copyright 2026 The sshdl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SSHDL_ERRORS_HPP_
#define SSHDL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace sshdl {

// Each failure class maps onto one CLI exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const = 0;
};

// Malformed model, weights document, config or format assignment.
class ValidationError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 1; }
};

// The resource schedule cannot meet the requested data rate.
class ScheduleError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

// Netlist simulation diverged from the functional fixed-point model.
class EquivalenceError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 3; }
};

// A cycle simulation ran out of cycles before its stimulus was consumed.
class SimulationTimeout : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 3; }
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 4; }
};

}  // namespace sshdl

#endif  // SSHDL_ERRORS_HPP_
