#pragma once

#include <stdexcept>

namespace pipeunroll {

// File and stream failures; maps to the I/O status at the C boundary.
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or command input; maps to exit code 2.
class ValidationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace pipeunroll
