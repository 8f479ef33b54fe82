#pragma once

#include <stdexcept>
#include <string>

namespace leebounds {

enum class ErrorKind {
  Schema,
  Value,
  Integrity,
  Parameter,
  Singularity,
  Separation,
  Convergence,
  InsufficientData,
  CellSupport,
  StratumSupport,
  Shape,
};

const char* kind_name(ErrorKind kind);

// Exit code used by the command line front end for each error class:
// 2 = configuration, 3 = data, 4 = numerical failure.
int exit_code_for(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace leebounds
