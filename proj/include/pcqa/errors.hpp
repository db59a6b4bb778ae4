#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace pcqa {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value object violated one of its construction rules.
class InvariantViolation : public Error {
 public:
  InvariantViolation(std::string where, std::string rule)
      : Error(where + ": " + rule), where_(std::move(where)), rule_(std::move(rule)) {}
  const std::string& where() const noexcept { return where_; }
  const std::string& rule() const noexcept { return rule_; }

 private:
  std::string where_;
  std::string rule_;
};

// Input file does not follow the documented JSON schema.
class SchemaError : public Error {
 public:
  SchemaError(std::string location, const std::string& detail)
      : Error("schema error at " + location + ": " + detail), location_(std::move(location)) {}
  const std::string& location() const noexcept { return location_; }

 private:
  std::string location_;
};

class UnreconstructibleDerivation : public Error {
 public:
  using Error::Error;
};

class MalformedOutput : public Error {
 public:
  using Error::Error;
};

class InvalidCombination : public Error {
 public:
  using Error::Error;
};

class AllSamplesDiscarded : public Error {
 public:
  AllSamplesDiscarded() : Error("every sample failed to parse or execute") {}
};

class EmptyRecordSet : public Error {
 public:
  EmptyRecordSet() : Error("no prediction records to aggregate") {}
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class UnknownTurnId : public Error {
 public:
  explicit UnknownTurnId(const std::string& id) : Error("unknown turn id: " + id) {}
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace pcqa
