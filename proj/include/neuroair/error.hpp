#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace neuroair {

// Stable numeric codes; the CLI uses them as process exit status.
enum class ErrorCode : int {
  kInvalidArgument = 2,
  kShapeMismatch = 3,
  kFormat = 4,
  kIo = 5,
  kNumerical = 6,
  kConvergence = 7,
  kConfig = 8,
  kPipelineStage = 9,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace neuroair
