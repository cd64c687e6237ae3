#ifndef CSPHHN_ERRORS_HPP_
#define CSPHHN_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace csphhn {

// Root of every library error. Callers that only need "it failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition of a public operation was not met (bad dimension, bad
// argument range). Indicates a programming error in the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class SeriesTooShort : public Error {
 public:
  using Error::Error;
};

class DanglingReference : public Error {
 public:
  using Error::Error;
};

// Malformed input document (JSON syntax or schema). The message carries the
// offending field path and, for syntax errors, the byte offset.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that breaks a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

namespace internal {

[[noreturn]] inline void ThrowContract(const std::string& what) {
  throw ContractViolation(what);
}

}  // namespace internal

#define CSPHHN_REQUIRE(cond, msg)                                        \
  do {                                                                   \
    if (!(cond)) ::csphhn::internal::ThrowContract(std::string(msg));    \
  } while (false)

}  // namespace csphhn

#endif  // CSPHHN_ERRORS_HPP_
