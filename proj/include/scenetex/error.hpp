#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scenetex {

enum class ErrorCode {
  EmptyInput,
  InvalidDepth,
  AllPointsCulled,
  DegenerateCloud,
  NonFiniteLoss,
  EmptyInstance,
  DegeneratePlane,
  DegenerateBounds,
  ShapeError,
  MissingUVs,
  InvalidInput,
  Io,
  GeneratorFailure,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidDepth: return "InvalidDepth";
    case ErrorCode::AllPointsCulled: return "AllPointsCulled";
    case ErrorCode::DegenerateCloud: return "DegenerateCloud";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyInstance: return "EmptyInstance";
    case ErrorCode::DegeneratePlane: return "DegeneratePlane";
    case ErrorCode::DegenerateBounds: return "DegenerateBounds";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::MissingUVs: return "MissingUVs";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::Io: return "Io";
    case ErrorCode::GeneratorFailure: return "GeneratorFailure";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Process exit status used by the command-line tool.
constexpr int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::GeneratorFailure: return 3;
    case ErrorCode::NonFiniteLoss: return 4;
    default: return 2;
  }
}

}  // namespace scenetex
