#pragma once

#include <stdexcept>

namespace etk {

// Malformed or missing user-supplied input (config, prior file, artifact
// file). The CLI maps this, unlike numeric failures, to its usage exit code.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace etk
