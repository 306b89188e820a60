#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace alent {

enum class ErrorCode {
  EmptyLattice,
  InfeasiblePair,
  TooManyPaths,
  DimMismatch,
  IdMismatch,
  InvalidArgument,
  Io,
  Parse,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyLattice: return "EmptyLattice";
    case ErrorCode::InfeasiblePair: return "InfeasiblePair";
    case ErrorCode::TooManyPaths: return "TooManyPaths";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

/// Library error carrying a machine-readable code. what() is "<Code>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace alent
