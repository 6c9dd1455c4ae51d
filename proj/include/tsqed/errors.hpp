#ifndef TSQED_ERRORS_HPP
#define TSQED_ERRORS_HPP

#include <cstdio>
#include <stdexcept>
#include <string>

namespace tsqed
{

enum class ErrorCategory
{
  Usage,
  InvalidArgument,
  Representation,
  Convergence,
  Solver,
  Ledger,
  Io
};

// Base for all library errors; the category drives the CLI exit code.
class Error : public std::runtime_error
{
public:
  Error(ErrorCategory category, const std::string &what)
    : std::runtime_error(what), category_(category)
  {
  }

  ErrorCategory category() const noexcept { return category_; }

private:
  ErrorCategory category_;
};

class UsageError : public Error
{
public:
  explicit UsageError(const std::string &what) : Error(ErrorCategory::Usage, what) {}
};

// Invalid configuration or scenario content; reported like a usage error.
class ConfigError : public Error
{
public:
  explicit ConfigError(const std::string &what) : Error(ErrorCategory::Usage, what) {}
};

class InvalidArgumentError : public Error
{
public:
  explicit InvalidArgumentError(const std::string &what)
    : Error(ErrorCategory::InvalidArgument, what)
  {
  }
};

// A propagator kind was requested in a representation that cannot express it.
class RepresentationError : public Error
{
public:
  explicit RepresentationError(const std::string &what)
    : Error(ErrorCategory::Representation, what)
  {
  }
};

class ConvergenceError : public Error
{
public:
  ConvergenceError(const std::string &what, double residual)
    : Error(ErrorCategory::Convergence, what + " (residual estimate " + format(residual) + ")"),
      residual_(residual)
  {
  }

  double residual() const noexcept { return residual_; }

private:
  static std::string format(double v)
  {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
  }

  double residual_;
};

class SolverError : public Error
{
public:
  SolverError(const std::string &what, double condition)
    : Error(ErrorCategory::Solver,
            what + " (condition estimate " + std::to_string(condition) + ")"),
      condition_(condition)
  {
  }

  double condition() const noexcept { return condition_; }

private:
  double condition_;
};

class LedgerError : public Error
{
public:
  explicit LedgerError(const std::string &what) : Error(ErrorCategory::Ledger, what) {}
};

class IoError : public Error
{
public:
  explicit IoError(const std::string &what) : Error(ErrorCategory::Io, what) {}
};

} // namespace tsqed

#endif // TSQED_ERRORS_HPP
