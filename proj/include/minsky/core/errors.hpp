#pragma once

#include <stdexcept>
#include <string>

namespace minsky {

/// Error categories double as process exit codes for the command-line tool
/// and as status codes on the C boundary.
enum class ErrorKind : int {
  internal = 1,
  config = 2,
  numerical = 3,
  io = 4,
  not_found = 5,
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

/// Invalid or out-of-domain model parameters, malformed configs.
class ParameterError : public Error {
public:
  explicit ParameterError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// Degenerate parameters for a closed form, solver non-convergence, failed fits.
class NumericalError : public Error {
public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class NotFoundError : public Error {
public:
  explicit NotFoundError(const std::string& what) : Error(ErrorKind::not_found, what) {}
};

}  // namespace minsky
