#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace envdeg {

enum class ErrorCode {
  InvalidArgument,
  InvalidDimension,
  InvalidDomain,
  OutOfDomain,
  InvalidConfig,
  ParseError,
  InconsistentLabel,
  NonMonotoneTime,
  IoError,
  SingularCovariance,
  EmptyCluster,
  LengthMismatch,
  RejectionOverflow,
  AllCensored,
  InvalidTruth,
  InsufficientData,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// command-line front end can map it to a distinct exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidDimension: return "InvalidDimension";
    case ErrorCode::InvalidDomain: return "InvalidDomain";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InconsistentLabel: return "InconsistentLabel";
    case ErrorCode::NonMonotoneTime: return "NonMonotoneTime";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::EmptyCluster: return "EmptyCluster";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::RejectionOverflow: return "RejectionOverflow";
    case ErrorCode::AllCensored: return "AllCensored";
    case ErrorCode::InvalidTruth: return "InvalidTruth";
    case ErrorCode::InsufficientData: return "InsufficientData";
  }
  return "Unknown";
}

}  // namespace envdeg
