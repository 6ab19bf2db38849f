#ifndef INTLAB_ERRORS_HPP
#define INTLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace intlab {

/// File or socket trouble. Message carries the path/endpoint and errno text.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Parameter store content is unusable (bad header, truncated, garbage fields).
struct StoreError : std::runtime_error {
  explicit StoreError(const std::string& what) : std::runtime_error(what) {}
};

/// Serialized state does not fit the 1024-byte parameter store.
struct StoreOverflow : StoreError {
  explicit StoreOverflow(const std::string& what) : StoreError(what) {}
};

}  // namespace intlab

#endif
