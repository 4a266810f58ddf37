#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lzguess {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input token not in the alphabet; position is 1-based.
class IngestError : public Error {
 public:
  IngestError(const std::string& what, std::size_t position)
      : Error(what), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// Corrupt or truncated code stream; bit_position is 0-based.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::size_t bit_position)
      : Error(what + " (at bit " + std::to_string(bit_position) + ")"),
        bit_position_(bit_position) {}
  std::size_t bit_position() const noexcept { return bit_position_; }

 private:
  std::size_t bit_position_;
};

// An exact computation was refused because its enumeration would be too large.
class BudgetError : public Error {
 public:
  using Error::Error;
};

// Caller violated a documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace lzguess
