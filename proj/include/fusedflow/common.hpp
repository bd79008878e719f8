// Copyright 2026 FusedFlow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fusedflow {

using Coord = std::int64_t;
using Count = std::int64_t;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `position` is a byte offset when known, else -1.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long position = -1)
      : Error(position >= 0 ? what + " (at byte " + std::to_string(position) + ")" : what),
        position_(position) {}
  long position() const { return position_; }

 private:
  long position_;
};

/// Rank extents that contradict each other.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A fusion set whose tensors do not form a connected producer/consumer chain.
class ChainError : public Error {
 public:
  using Error::Error;
};

/// Set operation between regions over different rank tuples.
class RankMismatchError : public Error {
 public:
  using Error::Error;
};

/// A name (rank, tensor, level, einsum) that does not exist.
class UnknownNameError : public Error {
 public:
  using Error::Error;
};

/// Enumeration or simulation exceeding its configured bound.
class LimitExceededError : public Error {
 public:
  using Error::Error;
};

/// A mapping that failed validation.
class InvalidMappingError : public Error {
 public:
  using Error::Error;
};

inline Coord ceil_div(Coord a, Coord b) { return (a + b - 1) / b; }

}  // namespace fusedflow
