#pragma once

#include <stdexcept>
#include <string>

namespace csvid {

// Error categories, mapped to process exit codes by the CLI:
// usage/contract -> 1, data/format -> 2, numerical failure -> 3.
enum class errc {
  invalid_argument,
  io_failure,
  bad_format,
  numeric_failure,
};

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, errc code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

}  // namespace csvid
