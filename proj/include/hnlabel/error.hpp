#pragma once

#include <stdexcept>
#include <string>

namespace hnl {

// Single exception type for contract violations and I/O failures. The message
// always carries enough context (path, dimensions) to be logged as-is.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace hnl
