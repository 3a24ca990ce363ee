// Copyright (c) 2026 The Cauliflow Authors
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

#ifndef CAULIFLOW_COMMON_ERROR_H_
#define CAULIFLOW_COMMON_ERROR_H_

#include <stdexcept>
#include <string>

namespace cauliflow {

// Base class for every error raised by the library. The CLI maps the
// concrete subclasses onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, log of non-positive input, singular transforms.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent corpus data.
class CorpusError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or schema violation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing files, unreadable inputs, bad checkpoints.
class IoError : public Error {
 public:
  using Error::Error;
};

// Divergence or degenerate training data.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace cauliflow

#endif  // CAULIFLOW_COMMON_ERROR_H_
