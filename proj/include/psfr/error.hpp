#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace psfr {

enum class ErrorCode {
  InvalidArgument,
  NoFrames,
  DimensionMismatch,
  CorruptFrame,
  IndexOutOfRange,
  CorruptCache,
  EmptyCandidates,
  MissingWeight,
  InvalidConfig,
  AlignmentError,
  MissingSignals,
  InvalidGenome,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoFrames: return "NoFrames";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::CorruptFrame: return "CorruptFrame";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::CorruptCache: return "CorruptCache";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::MissingWeight: return "MissingWeight";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::AlignmentError: return "AlignmentError";
    case ErrorCode::MissingSignals: return "MissingSignals";
    case ErrorCode::InvalidGenome: return "InvalidGenome";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace psfr
