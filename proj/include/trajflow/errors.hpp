#pragma once

#include <stdexcept>
#include <string>

namespace trajflow {

/// Argument outside the admissible range of a diagram or law.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Invalid scenario or parameter set. Mapped to exit code 2 by the CLI.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// CFL violation, vehicle collision, or any other failed numerical step. Exit code 3.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Unreadable/unwritable files and malformed input rows. Exit code 4.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace trajflow
