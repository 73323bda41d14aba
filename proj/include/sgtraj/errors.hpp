#pragma once

#include <stdexcept>
#include <string>

namespace sgtraj {

// Operand shapes do not fit the operation.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A precondition of an operation was violated by the caller.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Edge set references a node that does not exist.
struct GraphError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct LookupError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Malformed input file or record stream.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible run configuration, dataset or checkpoint.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}

}  // namespace detail
}  // namespace sgtraj
