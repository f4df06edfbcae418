#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace blurvo {

enum class ErrorCode {
  AngleNearPi,
  OutOfExposure,
  FractionOutOfRange,
  OutOfBounds,
  TooManyLevels,
  BehindCamera,
  NonPositiveDepth,
  RayParallelToPlane,
  IntersectionBehindCamera,
  CameraBehindPlane,
  BadParams,
  TooFewKeypoints,
  ConfigInvalid,
  DimensionMismatch,
  NoMatches,
  DegenerateConfiguration,
  IoError,
  ParseError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AngleNearPi: return "AngleNearPi";
    case ErrorCode::OutOfExposure: return "OutOfExposure";
    case ErrorCode::FractionOutOfRange: return "FractionOutOfRange";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::TooManyLevels: return "TooManyLevels";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::RayParallelToPlane: return "RayParallelToPlane";
    case ErrorCode::IntersectionBehindCamera: return "IntersectionBehindCamera";
    case ErrorCode::CameraBehindPlane: return "CameraBehindPlane";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::TooFewKeypoints: return "TooFewKeypoints";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoMatches: return "NoMatches";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace blurvo
