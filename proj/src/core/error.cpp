#include "ofilab/error.hpp"

namespace ofilab {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
    case ErrorCode::config: return "config";
    case ErrorCode::numeric: return "numeric";
    case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

}  // namespace ofilab
