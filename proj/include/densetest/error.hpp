#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace densetest {

enum class ErrorKind {
  NotPositiveDefinite,
  ZeroLoading,
  OutOfRange,
  TooFewSamples,
  DimensionMismatch,
  IterationLimit,
  DegenerateProjection,
  ZeroResidualVector,
  ZeroSynthesizedFeature,
  DegenerateStatistic,
  DegenerateResidual,
  InfeasibleEstimator,
  EmptyAcceptanceRegion,
  IndexOutOfRange,
  InvalidArgument,
  DataError,
  CampaignFailed,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::ZeroLoading: return "ZeroLoading";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::IterationLimit: return "IterationLimit";
    case ErrorKind::DegenerateProjection: return "DegenerateProjection";
    case ErrorKind::ZeroResidualVector: return "ZeroResidualVector";
    case ErrorKind::ZeroSynthesizedFeature: return "ZeroSynthesizedFeature";
    case ErrorKind::DegenerateStatistic: return "DegenerateStatistic";
    case ErrorKind::DegenerateResidual: return "DegenerateResidual";
    case ErrorKind::InfeasibleEstimator: return "InfeasibleEstimator";
    case ErrorKind::EmptyAcceptanceRegion: return "EmptyAcceptanceRegion";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DataError: return "DataError";
    case ErrorKind::CampaignFailed: return "CampaignFailed";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace densetest
