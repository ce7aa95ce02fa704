#pragma once

#include <stdexcept>
#include <string>

namespace autoscale {

/// Input violates a documented precondition (bad dims, bad config, empty set).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Reading or writing a file failed, or a file is malformed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace autoscale
