#pragma once

#include <stdexcept>

namespace ccgm {

/// Raised for malformed or inconsistent input data (exit code 1 in the CLI).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ccgm
