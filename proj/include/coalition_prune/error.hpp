#pragma once

#include <stdexcept>
#include <string>

namespace cprune {

enum class ErrorCode {
  argument,
  game_contract,
  capacity,
  undefined,  // quantity not defined for the input (zero-sample width, constant ranks)
  checkpoint,
  external,
  unsupported,
  parse,
  io,
};

const char* to_string(ErrorCode code);

// Single exception type for the whole core; the C API maps `code` onto its
// integer status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cprune
