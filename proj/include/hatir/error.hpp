#pragma once

#include <stdexcept>
#include <string>

namespace hatir {

enum class ErrorKind {
  Format,        // bad magic / malformed file
  Length,        // truncated payload
  Data,          // non-finite values
  Io,            // open/read/write failure
  Shape,         // dimension mismatch
  Range,         // index or coordinate out of range
  Precondition,  // documented precondition violated
  Config,        // unknown key or invalid config value
};

const char* to_string(ErrorKind kind) noexcept;

// Every failure in the library surfaces as this exception. The C API maps
// `kind()` onto a status code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace hatir
