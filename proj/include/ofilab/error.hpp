#pragma once

#include <stdexcept>
#include <string>

namespace ofilab {

enum class ErrorCode {
  invalid_argument = 1,
  io = 2,
  parse = 3,
  config = 4,
  numeric = 5,
  internal = 99,
};

const char* to_string(ErrorCode code) noexcept;

/// Library-wide exception. `field` names the offending input (a config key,
/// a file row, a design-matrix column) when one is known.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string field = {})
      : std::runtime_error(std::move(message)), code_(code), field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

[[noreturn]] inline void fail(ErrorCode code, std::string message, std::string field = {}) {
  throw Error(code, std::move(message), std::move(field));
}

}  // namespace ofilab
