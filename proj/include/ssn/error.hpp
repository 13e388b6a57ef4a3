// Copyright 2026 The ScribbleSeg Authors. All Rights Reserved.
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

#include <stdexcept>
#include <string>

namespace ssn {

// Base of every error raised by the library. `code()` is a stable
// machine-readable token used by the CLI and the HTTP service.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// File system and decoding failures (CLI exit code 2).
class IoError : public Error {
 public:
  using Error::Error;
  explicit IoError(const std::string& message) : Error("io_error", message) {}
};

// Bad arguments, shapes or labels (CLI exit code 3).
class ValidationError : public Error {
 public:
  using Error::Error;
  explicit ValidationError(const std::string& message)
      : Error("validation_error", message) {}
};

// Non-finite values during optimization (CLI exit code 4).
class NumericalError : public Error {
 public:
  using Error::Error;
  explicit NumericalError(const std::string& message)
      : Error("numerical_error", message) {}
};

// A constraint set with no labeled pixels was handed to an operation
// that needs at least one.
class EmptyScribblesError : public ValidationError {
 public:
  EmptyScribblesError() : ValidationError("empty_scribbles", "scribble set is empty") {}
};

}  // namespace ssn
