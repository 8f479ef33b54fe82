#include "leebounds/errors.hpp"

namespace leebounds {

const char* kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Schema: return "schema error";
    case ErrorKind::Value: return "value error";
    case ErrorKind::Integrity: return "integrity error";
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::Singularity: return "singularity error";
    case ErrorKind::Separation: return "separation error";
    case ErrorKind::Convergence: return "convergence error";
    case ErrorKind::InsufficientData: return "insufficient-data error";
    case ErrorKind::CellSupport: return "cell-support error";
    case ErrorKind::StratumSupport: return "stratum-support error";
    case ErrorKind::Shape: return "shape error";
  }
  return "error";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Schema:
    case ErrorKind::Parameter:
      return 2;
    case ErrorKind::Value:
    case ErrorKind::Integrity:
    case ErrorKind::InsufficientData:
    case ErrorKind::CellSupport:
    case ErrorKind::StratumSupport:
    case ErrorKind::Shape:
      return 3;
    case ErrorKind::Singularity:
    case ErrorKind::Separation:
    case ErrorKind::Convergence:
      return 4;
  }
  return 1;
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(kind_name(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace leebounds
