// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace rda {

/// Failure categories. The C API maps each one to a distinct status code and
/// the CLI maps those to process exit codes.
enum class ErrorCategory {
  Config = 2,
  Numerical = 3,
  Assertion = 4,
  Usage = 5,
  Io = 6,
  Protocol = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& what) {
  throw Error(category, what);
}

inline void require(bool condition, ErrorCategory category, const char* what) {
  if (!condition) throw Error(category, what);
}

}  // namespace rda
