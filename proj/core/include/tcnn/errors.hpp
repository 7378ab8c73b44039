#pragma once

#include <stdexcept>

namespace tcnn {

// Bad or missing input data: unreadable files, malformed annotations,
// missing upstream artifacts, unsupported container versions.
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure: divergence, non-finite values, degenerate geometry.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Command-line misuse. The CLI maps this to exit code 1.
struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tcnn
