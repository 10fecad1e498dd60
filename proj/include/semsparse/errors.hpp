#pragma once

#include <stdexcept>
#include <string>

namespace semsparse {

// Malformed or unreadable PGM / dictionary / operator files.
class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent experiment configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A solver or sampler produced a non-finite or degenerate state (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace semsparse
