#pragma once

#include <stdexcept>
#include <string>

namespace didkit {

inline constexpr const char* kVersion = "0.1.0";

/// Bad input: malformed files, unbalanced panels, design assumptions violated.
/// CLI maps this to exit code 2.
class validation_error : public std::runtime_error {
 public:
  explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Estimation failed on valid input (degenerate denominators, rank loss,
/// too-sparse resamples). CLI maps this to exit code 3.
class estimation_error : public std::runtime_error {
 public:
  explicit estimation_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace didkit
