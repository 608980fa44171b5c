#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace monge {

enum class ErrorCode {
  DuplicateSites,
  DomainMismatch,
  UnsupportedDomain,
  NotInSPlus,
  InitializationFailed,
  NoConvergence,
  LinearSolveFailed,
  ResolutionMismatch,
  BadWeights,
  SizeLimit,
  DegenerateInput,
  BadK,
  ParseError,
  OutOfDomain,
  EmptyFile,
  AllBelowThreshold,
  BadMagic,
  Truncated,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateSites: return "DuplicateSites";
    case ErrorCode::DomainMismatch: return "DomainMismatch";
    case ErrorCode::UnsupportedDomain: return "UnsupportedDomain";
    case ErrorCode::NotInSPlus: return "NotInSPlus";
    case ErrorCode::InitializationFailed: return "InitializationFailed";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::LinearSolveFailed: return "LinearSolveFailed";
    case ErrorCode::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorCode::BadWeights: return "BadWeights";
    case ErrorCode::SizeLimit: return "SizeLimit";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::BadK: return "BadK";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::AllBelowThreshold: return "AllBelowThreshold";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable code plus the name of the module
/// that raised it. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string_view module, const std::string& what)
      : std::runtime_error(std::string(module) + ": " +
                           std::string(to_string(code)) + ": " + what),
        code_(code),
        module_(module) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view module() const noexcept { return module_; }

 private:
  ErrorCode code_;
  std::string_view module_;
};

}  // namespace monge
