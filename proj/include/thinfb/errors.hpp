#pragma once

#include <stdexcept>
#include <string>

namespace thinfb {

/// A scalar parameter is outside the domain of the operation.
class InvalidParameter : public std::invalid_argument {
 public:
  explicit InvalidParameter(const std::string& what) : std::invalid_argument(what) {}
};

/// An argument is structurally incompatible (wrong grid, bad vector field).
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

/// A ball (or annulus) does not fit inside the computational box.
class InvalidRadius : public InvalidParameter {
 public:
  explicit InvalidRadius(const std::string& what) : InvalidParameter(what) {}
};

/// The linear algebra produced non-finite values.
class SolverBreakdown : public std::runtime_error {
 public:
  explicit SolverBreakdown(const std::string& what) : std::runtime_error(what) {}
};

/// The requested case is deliberately not handled.
class Unsupported : public std::domain_error {
 public:
  explicit Unsupported(const std::string& what) : std::domain_error(what) {}
};

}  // namespace thinfb
