#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dqsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configuration violates one of its invariants. Also raised for
// parsed config files whose values are out of range.
class ConfigInvalid : public Error {
 public:
  using Error::Error;
};

// A queue length no longer fits the 32-bit observation field. In practice
// this only happens for unstable systems (load >= 1) run for a long time.
class QueueOverflow : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UnknownTable : public Error {
 public:
  using Error::Error;
};

enum class EstimatorErrc {
  ArmEmpty,
  MissingObservation,
  NoSamples,
  TruncationTooLong,
  InsufficientData,
  WrongDesign,
};

const char* to_string(EstimatorErrc code) noexcept;

class EstimatorError : public Error {
 public:
  EstimatorError(EstimatorErrc code, const std::string& what)
      : Error(std::string(to_string(code)) + ": " + what), code_(code) {}
  EstimatorErrc code() const noexcept { return code_; }

 private:
  EstimatorErrc code_;
};

}  // namespace dqsim
