/*
 * Copyright 2026 The CollabEdit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef COLLABEDIT_ERRORS_H_
#define COLLABEDIT_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace collabedit {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied something that violates a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// A packet was produced against a global snapshot that is no longer current.
class StaleSnapshot : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// The fact universe has no unused (subject, relation) pairs left.
class UniverseExhausted : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Floating-point computation could not be completed reliably.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public NumericalError {
 public:
  SingularMatrix(std::size_t pivot, const std::string& what)
      : NumericalError(what), pivot_(pivot) {}

  // Index of the first pivot that fell below the singularity threshold.
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

}  // namespace collabedit

#endif  // COLLABEDIT_ERRORS_H_
