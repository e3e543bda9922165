#pragma once

#include <stdexcept>
#include <string>

namespace sadiar {

// Bad external input: malformed files, missing data, invalid references.
// The CLI maps this to exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken internal contract: shape mismatches, non-finite values, violated
// invariants. The CLI maps this to exit code 3.
struct InternalError : std::runtime_error {
  explicit InternalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user-supplied configuration or flags. The CLI maps this to exit code 1.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sadiar
