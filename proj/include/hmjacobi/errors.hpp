#pragma once

#include <stdexcept>
#include <string>

namespace hmjacobi {

enum class ErrorCode {
  NotProjectable,
  ChartSingularity,
  MixedBasePoints,
  UnsupportedDomain,
  NotHorizontallyConformal,
  DomainMismatch,
  ConvergenceFailure,
  FrameConstructionFailure,
  FiberSamplingUnavailable,
  IllConditionedFit,
  NotConstantNorm,
  UnknownCatalogId,
  ConfigParseError,
  IoError,
  InvalidArgument,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotProjectable: return "NotProjectable";
    case ErrorCode::ChartSingularity: return "ChartSingularity";
    case ErrorCode::MixedBasePoints: return "MixedBasePoints";
    case ErrorCode::UnsupportedDomain: return "UnsupportedDomain";
    case ErrorCode::NotHorizontallyConformal: return "NotHorizontallyConformal";
    case ErrorCode::DomainMismatch: return "DomainMismatch";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::FrameConstructionFailure: return "FrameConstructionFailure";
    case ErrorCode::FiberSamplingUnavailable: return "FiberSamplingUnavailable";
    case ErrorCode::IllConditionedFit: return "IllConditionedFit";
    case ErrorCode::NotConstantNorm: return "NotConstantNorm";
    case ErrorCode::UnknownCatalogId: return "UnknownCatalogId";
    case ErrorCode::ConfigParseError: return "ConfigParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hmjacobi
