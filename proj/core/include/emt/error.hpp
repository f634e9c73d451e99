#pragma once

#include <stdexcept>
#include <string>

namespace emt {

// Thrown when vector/matrix/tensor shapes do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EmptyInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values appeared in parameters or activations.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Classification dataset with fewer than two distinct labels.
class DegenerateLabelsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace emt
