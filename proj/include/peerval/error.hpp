#pragma once

#include <stdexcept>
#include <string>

namespace peerval {

// Every failure the library reports derives from Error. The CLI maps
// ConfigError/ParseError/IntegrityError/ContractViolation to exit status 2
// and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class CapabilityError : public Error {
 public:
  using Error::Error;
};

class RetryableError : public Error {
 public:
  RetryableError(const std::string& what, int attempts)
      : Error(what + " after " + std::to_string(attempts) + " attempt(s)"), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

// Non-retryable transport outcome (4xx other than 429, malformed body).
class TransportError : public Error {
 public:
  using Error::Error;
};

class UnparseableError : public Error {
 public:
  using Error::Error;
};

class AmbiguityError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

class ExamInconclusive : public Error {
 public:
  using Error::Error;
};

class VariantDegenerate : public Error {
 public:
  using Error::Error;
};

}  // namespace peerval
