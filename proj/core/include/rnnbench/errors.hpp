#pragma once

#include <stdexcept>
#include <string>

namespace rnnbench {

// Error taxonomy. The CLI maps these onto process exit codes:
// config/shape/contract problems -> 2, data/parse/io -> 3, numerical -> 4.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParameterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OracleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SearchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rnnbench
