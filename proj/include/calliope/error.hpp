#pragma once

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace calliope {

enum class ErrorCode {
  // midi
  MalformedHeader,
  TruncatedChunk,
  BadVarLen,
  UnsupportedFormat,
  MalformedEvent,
  InvariantViolation,
  // grid
  IndexOutOfBounds,
  NoteOutsideCell,
  LastTrackDeletion,
  // generation
  EmptySelection,
  EmptyWeights,
  NonPositiveWeight,
  InvalidArgument,
  GeneratorFailure,
  PlanEmpty,
  // ranking
  DimensionMismatch,
  EmptyCandidates,
  // service
  ValidationError,
  ParseError,
  StorageError,
  NotFound,
  // playback
  SinkClosed,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::TruncatedChunk: return "TruncatedChunk";
    case ErrorCode::BadVarLen: return "BadVarLen";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::MalformedEvent: return "MalformedEvent";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::IndexOutOfBounds: return "IndexOutOfBounds";
    case ErrorCode::NoteOutsideCell: return "NoteOutsideCell";
    case ErrorCode::LastTrackDeletion: return "LastTrackDeletion";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::EmptyWeights: return "EmptyWeights";
    case ErrorCode::NonPositiveWeight: return "NonPositiveWeight";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::GeneratorFailure: return "GeneratorFailure";
    case ErrorCode::PlanEmpty: return "PlanEmpty";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::StorageError: return "StorageError";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::SinkClosed: return "SinkClosed";
  }
  return "Unknown";
}

/// Every failure raised by the library. The code is the stable, typed part;
/// the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct FieldError {
  std::string field;
  std::string message;
};

/// Request validation failure carrying one entry per offending field.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<FieldError> fields)
      : Error(ErrorCode::ValidationError, summarize(fields)), fields_(std::move(fields)) {}
  ValidationError(std::initializer_list<FieldError> fields) : ValidationError(std::vector<FieldError>(fields)) {}

  const std::vector<FieldError>& fields() const noexcept { return fields_; }

 private:
  static std::string summarize(const std::vector<FieldError>& fields) {
    std::string out;
    for (const auto& f : fields) {
      if (!out.empty()) out += "; ";
      out += f.field + ": " + f.message;
    }
    return out;
  }

  std::vector<FieldError> fields_;
};

/// Generator failure tagged with the plan step that was executing.
class GeneratorFailure : public Error {
 public:
  GeneratorFailure(std::size_t step, const std::string& message)
      : Error(ErrorCode::GeneratorFailure, "step " + std::to_string(step) + ": " + message),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace calliope
