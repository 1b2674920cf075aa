#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace dbt {

/// Precondition or invariant violation on a numeric argument.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Input data that cannot be processed: malformed files, unusable spectra,
/// ill-conditioned regressions.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A text file failed to parse. `line` is 1-based; 0 when the problem is not
/// tied to a single line (e.g. a missing header field).
class ParseError : public DataError {
 public:
  ParseError(std::string file, std::size_t line, const std::string& what)
      : DataError(format(file, line, what)), file_(std::move(file)), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& file, std::size_t line, const std::string& what) {
    std::string out = file.empty() ? std::string("<input>") : file;
    if (line > 0) out += ":" + std::to_string(line);
    return out + ": " + what;
  }

  std::string file_;
  std::size_t line_;
};

/// The normal matrix of a fit is singular (e.g. no absorption in the scan).
class DegenerateFitError : public DataError {
 public:
  using DataError::DataError;
};

/// The optimizer stopped without meeting its convergence criteria and the
/// caller asked for converged results only.
class NonConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

}  // namespace detail

}  // namespace dbt
