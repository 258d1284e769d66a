// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cap2sum {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A domain type violated one of its invariants.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, std::string invariant)
      : Error(field + ": " + invariant),
        field_(std::move(field)),
        invariant_(std::move(invariant)) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string field_;
  std::string invariant_;
};

/// Malformed or unreadable input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Stored payload does not match its checksum or content hash.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Lookup of an unknown key (video id, parameter name, ...).
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent configuration, including checkpoint/model mismatches.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes that cannot be combined.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace cap2sum
