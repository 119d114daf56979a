#pragma once

#include <stdexcept>
#include <string>

namespace crosspoint {

// Bad arguments: dimension mismatches, malformed configs, violated preconditions.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure could not produce a trustworthy answer
// (bisection failed to bracket, PSD violation beyond tolerance, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

}  // namespace crosspoint
