#pragma once

#include <stdexcept>
#include <string>

namespace liebridge {

/// Malformed or out-of-contract input (wrong dimension, non-orthogonal rotation, bad config value).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A logarithm was requested outside its principal branch (cut locus).
class BranchError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iteration failed to converge, weights underflowed, or a value went non-finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace liebridge
