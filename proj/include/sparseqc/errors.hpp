#pragma once

#include <stdexcept>
#include <string>

namespace sparseqc {

// Mismatched dimensions, invalid pairings, bad config values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed inputs: non-finite samples, unnormalized states, bad files.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite objective values and other failures during a solve.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sparseqc
