#pragma once

#include <stdexcept>
#include <string>

namespace spot {

// Malformed or inconsistent input data (corpus files, annotation files,
// vector files, checkpoints).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (shape mismatch, bad config).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace spot
