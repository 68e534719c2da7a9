#pragma once

#include <stdexcept>
#include <string>

namespace endotrack {

enum class ErrorCode {
  ZeroQuaternion,
  NotARotation,
  InvalidQuaternion,
  BadPermutation,
  ShapeMismatch,
  NonFiniteFunction,
  BadChannelCount,
  BadExtent,
  BadPenalty,
  LengthMismatch,
  UnitMismatch,
  AlignmentError,
  ParseError,
  InvalidPose,
  ConfigError,
};

constexpr const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroQuaternion: return "ZeroQuaternion";
    case ErrorCode::NotARotation: return "NotARotation";
    case ErrorCode::InvalidQuaternion: return "InvalidQuaternion";
    case ErrorCode::BadPermutation: return "BadPermutation";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteFunction: return "NonFiniteFunction";
    case ErrorCode::BadChannelCount: return "BadChannelCount";
    case ErrorCode::BadExtent: return "BadExtent";
    case ErrorCode::BadPenalty: return "BadPenalty";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UnitMismatch: return "UnitMismatch";
    case ErrorCode::AlignmentError: return "AlignmentError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidPose: return "InvalidPose";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace endotrack
