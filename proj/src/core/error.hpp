#pragma once
// Error taxonomy shared by the C++ core and the C API layer. Every failure
// the library can surface carries one of these codes; the C API maps them
// 1:1 onto udvd_status values.

#include <sstream>
#include <stdexcept>
#include <string>

namespace udvd {

enum class ErrorCode {
  Param = 1,    // invalid argument value (out of range, wrong sign, ...)
  Shape = 2,    // tensor dimension mismatch
  Config = 3,   // inconsistent model or training configuration
  Io = 4,       // file read/write failure
  Graph = 5,    // autodiff graph misuse
  Numeric = 6,  // non-finite values where finite ones are required
  Internal = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {
template <typename... Parts>
std::string cat(Parts&&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  return os.str();
}
}  // namespace detail

template <typename... Parts>
[[noreturn]] void fail(ErrorCode code, Parts&&... parts) {
  throw Error(code, detail::cat(std::forward<Parts>(parts)...));
}

template <typename... Parts>
[[noreturn]] void fail_shape(Parts&&... parts) {
  fail(ErrorCode::Shape, std::forward<Parts>(parts)...);
}

template <typename... Parts>
[[noreturn]] void fail_param(Parts&&... parts) {
  fail(ErrorCode::Param, std::forward<Parts>(parts)...);
}

}  // namespace udvd
