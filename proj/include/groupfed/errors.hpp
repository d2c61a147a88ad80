#pragma once

#include <stdexcept>
#include <string>

namespace groupfed {

// Invalid experiment configuration (CLI exit code 2).
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Tensor/batch dimensions inconsistent with a ModelSpec.
struct shape_error : std::invalid_argument {
  explicit shape_error(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed on-disk data, carries the byte offset of the problem.
struct format_error : std::runtime_error {
  format_error(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"), byte_offset(offset) {}
  std::size_t byte_offset;
};

// Training/optimization failed to converge; carries the last gradient norm.
struct convergence_error : std::runtime_error {
  convergence_error(const std::string& what, double gnorm)
      : std::runtime_error(what + " (last gradient norm " + std::to_string(gnorm) + ")"),
        last_gradient_norm(gnorm) {}
  double last_gradient_norm;
};

}  // namespace groupfed
