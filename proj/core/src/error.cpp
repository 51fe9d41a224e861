#include "cts/error.hpp"

namespace cts {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::argument: return "argument error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::schema: return "schema error";
    case ErrorKind::format: return "format error";
    case ErrorKind::integrity: return "integrity error";
    case ErrorKind::transport: return "transport error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::degenerate: return "degenerate input";
  }
  return "error";
}

}  // namespace cts
