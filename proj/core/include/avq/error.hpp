#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace avq {

// Every failure the pipeline can report. Diagnostics carry the module name
// so the CLI can tell the user which stage rejected the input.
enum class ErrorCode {
  // media-io
  MalformedHeader,
  TruncatedFrame,
  UnsupportedPixelFormat,
  MalformedRiff,
  UnsupportedEncoding,
  EmptyData,
  MissingColumn,
  MosOutOfRange,
  DuplicateId,
  MalformedRow,
  // visual-features
  FrameTooSmall,
  DegenerateInput,
  // audio-features
  SignalTooShort,
  // fusion
  ColumnCountMismatch,
  PerClipMismatch,
  EmptyInput,
  // neural
  NonFiniteLoss,
  DimensionMismatch,
  RowCountMismatch,
  UnsupportedVersion,
  // scoring
  NotAProbabilityColumn,
  DegenerateVariance,
  // cv-harness
  TooFewEntries,
  // distortion-lab
  UnknownKind,
  IoFailure,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string_view module, const std::string& detail)
      : std::runtime_error(std::string(module) + ": " +
                           std::string(to_string(code)) + ": " + detail),
        code_(code),
        module_(module) {}

  ErrorCode code() const { return code_; }
  const std::string& module() const { return module_; }

 private:
  ErrorCode code_;
  std::string module_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::TruncatedFrame: return "TruncatedFrame";
    case ErrorCode::UnsupportedPixelFormat: return "UnsupportedPixelFormat";
    case ErrorCode::MalformedRiff: return "MalformedRiff";
    case ErrorCode::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::MosOutOfRange: return "MosOutOfRange";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::FrameTooSmall: return "FrameTooSmall";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::ColumnCountMismatch: return "ColumnCountMismatch";
    case ErrorCode::PerClipMismatch: return "PerClipMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::RowCountMismatch: return "RowCountMismatch";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::NotAProbabilityColumn: return "NotAProbabilityColumn";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::TooFewEntries: return "TooFewEntries";
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "UnknownError";
}

}  // namespace avq
