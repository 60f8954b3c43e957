#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mftg {

/// One violated well-posedness condition found by validate().
struct Diagnostic {
  std::string code;       // stable identifier, e.g. "weight_positivity"
  std::string message;    // human readable, names the offending field
  std::string condition;  // the positivity/boundedness/shape condition it maps to

  bool operator==(const Diagnostic&) const = default;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration text is not syntactically valid. Line and column are 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(what), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Well-formed document with a missing field, an unknown key or a forbidden
/// family/field combination.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Diagnostic> diagnostics);

  const std::vector<Diagnostic>& diagnostics() const noexcept {
    return diagnostics_;
  }

 private:
  std::vector<Diagnostic> diagnostics_;
};

/// A coupling matrix is (numerically) singular, so the equilibrium formula
/// does not apply.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// A backward coefficient left the representable range.
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// Non-finite input or an argument outside the mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Request exceeds the memory budget.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Operation called on an input it is not defined for.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

}  // namespace mftg
