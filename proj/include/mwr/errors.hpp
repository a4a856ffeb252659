#pragma once

#include <stdexcept>
#include <string>

namespace mwr {

/// Malformed or unreadable input file.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure (non-finite cost, quadrature non-convergence, ...).
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid argument or configuration value.
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mwr
