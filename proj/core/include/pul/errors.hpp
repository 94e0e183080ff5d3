#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pul {

// Bad argument values, shape mismatches, violated invariants in inputs.
struct InvalidInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// fine_tune called with no selected samples.
struct EmptyTrainingSet : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed file content; carries the offset of the first bad byte.
struct ParseError : std::runtime_error {
  std::size_t byte_offset;
  ParseError(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg + " (byte " + std::to_string(offset) + ")"), byte_offset(offset) {}
};

// File carries a format version this build does not understand.
struct VersionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem failures: open, read, write, lock.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A condition callers cannot trigger through the public API.
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace pul
