// Copyright 2026 The edl3d Authors
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

#ifndef EDL3D_ERROR_HPP_
#define EDL3D_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace edl3d {

/// Bad argument: non-finite value, degenerate box, empty collection, size mismatch.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A domain-type invariant does not hold (e.g. alpha <= 1 on an Nig).
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A computation produced a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A quantity is mathematically undefined for the given data
/// (constant series for a correlation, empty GT set for recall, constant
/// column for min-max bounds).
class UndefinedResult : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed text input. `column()` is the zero-based field index when known,
/// -1 otherwise.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int column = -1)
      : std::runtime_error(what), column_(column) {}
  int column() const noexcept { return column_; }

 private:
  int column_;
};

/// File-system failure; the message carries the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace edl3d

#endif  // EDL3D_ERROR_HPP_
