#pragma once

#include <stdexcept>
#include <string>

namespace ipp {

// Malformed or inconsistent input (dimension mismatch, duplicate points, bad schema).
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

// The instance admits no feasible solution (e.g. budget below the shortest s-t route).
class InfeasibleInstance : public std::runtime_error {
 public:
  explicit InfeasibleInstance(const std::string& what) : std::runtime_error(what) {}
};

// A broken internal contract; never expected on valid input.
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace ipp
