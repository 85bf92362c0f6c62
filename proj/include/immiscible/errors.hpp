#pragma once

#include <stdexcept>
#include <string>

namespace immiscible {

// Shapes of two operands disagree (rows, columns, dimension).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A cost matrix contains NaN, infinity or a negative entry.
class InvalidCostError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Problem too large for an exhaustive method.
class SizeLimitError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A value falls outside a representable or permitted range.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Generic bad argument (shard counts, step order, unknown names, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values produced during a computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace immiscible
