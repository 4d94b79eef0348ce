#include "psld/error.hpp"

namespace psld {

const char* to_string(ErrorKind k) noexcept {
  switch (k) {
    case ErrorKind::NotSPD: return "NotSPD";
    case ErrorKind::Singular: return "Singular";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::SingularA: return "SingularA";
    case ErrorKind::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorKind::SingularCOut: return "SingularCOut";
    case ErrorKind::InsufficientHistory: return "InsufficientHistory";
    case ErrorKind::MissingTable: return "MissingTable";
    case ErrorKind::BadRange: return "BadRange";
    case ErrorKind::SolverFailure: return "SolverFailure";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

int exit_code(ErrorKind k) noexcept {
  switch (k) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::BadRange: return 2;
    case ErrorKind::Io: return 3;
    case ErrorKind::MissingTable:
    case ErrorKind::InsufficientHistory: return 4;
    case ErrorKind::NotSPD:
    case ErrorKind::Singular:
    case ErrorKind::SingularA:
    case ErrorKind::SingularCOut:
    case ErrorKind::DegenerateCovariance: return 5;
    case ErrorKind::QuadratureFailure:
    case ErrorKind::SolverFailure: return 6;
  }
  return 1;
}

}  // namespace psld
