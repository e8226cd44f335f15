#pragma once

#include <stdexcept>
#include <string>

namespace ecg {

// Error taxonomy, one class per CLI exit code (usage=1, data=2,
// checkpoint=3, numeric=4). Shape violations surface to the user as
// malformed input, so the CLI maps them to the data exit code.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ecg
