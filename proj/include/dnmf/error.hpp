#pragma once

#include <stdexcept>
#include <string>

namespace dnmf {

/// Bad user input: unreadable paths, malformed files, out-of-range options.
/// The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Internal failure or broken numeric contract (e.g. monotonicity violation).
/// The CLI maps these to exit code 1.
class ComputeError : public std::runtime_error {
 public:
  explicit ComputeError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dnmf
