#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sms {

enum class ErrorCode {
  // input / parse failures
  DuplicateId,
  FileUnreadable,
  DimensionMismatch,
  CorruptManifest,
  ParseError,
  EmptyFile,
  NonFiniteValue,
  InvalidArgument,
  UnknownCandidate,
  MissingAccuracy,
  LengthMismatch,
  SupportMismatch,
  // numeric failures
  NonFiniteInput,
  NonPositiveTemperature,
  NotNormalized,
  InvalidDimension,
  InvalidRate,
  SingletonCluster,
  TooFewSamples,
  DegenerateLabels,
  TooFewPoints,
  NotPositiveDefinite,
  SingleBin,
  EmptyCandidateSet,
  InfiniteDivergence,
  ZeroVariance,
  DegenerateX,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::FileUnreadable: return "FileUnreadable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::CorruptManifest: return "CorruptManifest";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnknownCandidate: return "UnknownCandidate";
    case ErrorCode::MissingAccuracy: return "MissingAccuracy";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SupportMismatch: return "SupportMismatch";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::InvalidDimension: return "InvalidDimension";
    case ErrorCode::InvalidRate: return "InvalidRate";
    case ErrorCode::SingletonCluster: return "SingletonCluster";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::SingleBin: return "SingleBin";
    case ErrorCode::EmptyCandidateSet: return "EmptyCandidateSet";
    case ErrorCode::InfiniteDivergence: return "InfiniteDivergence";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::DegenerateX: return "DegenerateX";
  }
  return "Unknown";
}

/// True for failures caused by unusable input files or arguments (CLI exit 2);
/// everything else is a numeric failure (CLI exit 3).
constexpr bool is_input_error(ErrorCode code) {
  return code <= ErrorCode::SupportMismatch;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace sms
