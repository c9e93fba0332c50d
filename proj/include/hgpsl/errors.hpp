#pragma once

#include <stdexcept>
#include <string>

namespace hgpsl {

// Operand shapes do not line up.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Index list out of range, unsorted, or a label outside its class range.
struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// A caller broke an operation precondition (non-scalar loss, empty graph...).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Malformed input files or an incomplete dataset archive.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration values.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Network failure while fetching a dataset.
struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unknown dataset name.
struct LookupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A computation produced NaN or Inf.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Not enough graphs to split.
struct SizeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace hgpsl
