#pragma once

#include <stdexcept>
#include <string>

namespace ecgfwd {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid inputs: malformed meshes, bad parameters, contract violations.
/// CLI maps these to exit code 1.
struct ValidationError : Error {
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

/// Filesystem and serialization failures. CLI maps these to exit code 2.
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace ecgfwd
