#pragma once

#include <stdexcept>
#include <string>

namespace crpsreg {

// Raised for invalid arguments or data: bad parameters, malformed inputs,
// quantities that are undefined for the given distribution.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace crpsreg
