#pragma once

#include <stdexcept>
#include <string>

namespace sumkit {

/// Raised for malformed or unusable input data (bad files, empty corpora,
/// out-of-range parameters supplied by the caller).  Callers that want to
/// distinguish "your data is bad" from "the library is broken" can catch
/// this type; anything else escaping the library is a genuine bug.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sumkit
