// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IVA_ERRORS_HPP
#define IVA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace iva {

// Malformed or inconsistent file contents.
class format_error : public std::runtime_error {
 public:
  explicit format_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values or singular matrices encountered at run time.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace iva

#endif  // IVA_ERRORS_HPP
