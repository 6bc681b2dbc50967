#ifndef LCE_ERROR_HPP
#define LCE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace lce {

/// Raised by every module on malformed input or violated preconditions.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lce

#endif
