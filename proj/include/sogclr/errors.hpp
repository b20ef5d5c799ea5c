#pragma once

#include <stdexcept>
#include <string>

namespace sogclr {

// Every failure raised by the library carries one of these categories. The
// CLI maps them onto process exit codes.
enum class ErrorKind {
  invalid_argument,
  degenerate_input,
  size_limit,
  state,
  numeric,
  config,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

/// Process exit code for an error category (0 is reserved for success).
int exit_code(ErrorKind kind) noexcept;

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

}  // namespace sogclr
