#pragma once

#include <stdexcept>
#include <string>

namespace psld {

enum class ErrorKind {
  NotSPD,
  Singular,
  QuadratureFailure,
  SingularA,
  DegenerateCovariance,
  SingularCOut,
  InsufficientHistory,
  MissingTable,
  BadRange,
  SolverFailure,
  InvalidConfig,
  Io,
};

const char* to_string(ErrorKind k) noexcept;

// process exit code used by the CLI for each error class
int exit_code(ErrorKind k) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace psld
