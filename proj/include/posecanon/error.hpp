#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace posecanon {

enum class ErrorCode {
  DegenerateInput,
  DegenerateBone,
  DegenerateTorso,
  DegenerateConfiguration,
  InvalidRange,
  InvalidSplit,
  InvalidConfig,
  ShapeMismatch,
  NonFinite,
  ParseError,
  UnknownJointName,
  VersionMismatch,
  ConfigMismatch,
  EmptySequence,
  TooShort,
  ZeroVariance,
  IoError,
};

std::string_view errorCodeName(ErrorCode code);

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(errorCodeName(code)) + ": " + message),
        code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept {
    return code_;
  }

 private:
  ErrorCode code_;
};

} // namespace posecanon
