#include "sogclr/errors.hpp"

namespace sogclr {

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::degenerate_input: return "degenerate input";
    case ErrorKind::size_limit: return "size limit";
    case ErrorKind::state: return "state error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::config: return "config error";
    case ErrorKind::io: return "i/o error";
  }
  return "error";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::numeric: return 3;
    case ErrorKind::io: return 4;
    case ErrorKind::invalid_argument: return 5;
    case ErrorKind::degenerate_input: return 6;
    case ErrorKind::size_limit: return 7;
    case ErrorKind::state: return 8;
  }
  return 1;
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace sogclr
