// Copyright 2026 The incrca Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef INCRCA_ERRORS_HPP_
#define INCRCA_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace incrca {

// Every library failure derives from Error so the CLI can map it to an exit
// code in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed a value outside an operation's precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Configuration is missing, malformed or names something that does not exist.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data could not be parsed (bad number, bad quoting, bad timestamp).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Input parsed but violates the layout contract (duplicate or irregular
// timestamps, missing values, mismatched node sets).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Data has no usable spectrum or structure.
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

// Optimization produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Synthetic generator could not satisfy its constraints.
class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace incrca

#endif  // INCRCA_ERRORS_HPP_
