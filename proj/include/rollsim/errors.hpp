// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace rollsim {

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad configuration values (out-of-range knobs, inconsistent settings).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Malformed input files. Messages carry "path:line:" where applicable.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Structurally valid input that violates a semantic invariant.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Cluster capacity cannot satisfy a placement request.
class PlacementError : public Error {
 public:
  explicit PlacementError(const std::string& msg) : Error(msg) {}
};

}  // namespace rollsim
