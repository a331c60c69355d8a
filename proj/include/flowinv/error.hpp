// Copyright 2026 The flowinv Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace flowinv {

// Base of every error thrown by the library. The CLI maps these to exit
// code 2 (data error).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or argument values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable or malformed trace input.
class TraceError : public Error {
 public:
  using Error::Error;
};

// Flow table contract violations (e.g. out-of-order packets).
class FlowTableError : public Error {
 public:
  using Error::Error;
};

class InversionError : public Error {
 public:
  using Error::Error;
};

class BinningError : public Error {
 public:
  using Error::Error;
};

// Calibration target cannot be reached.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace flowinv
