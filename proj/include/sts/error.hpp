#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sts {

enum class ErrorKind {
  InvalidArgument,
  OverRange,
  InsufficientSamples,
  NonPositiveScale,
  EmptyChannel,
  SchemaViolation,
  NoOverlap,
  DimensionMismatch,
  EmptyTrainingSet,
  EmptyTestSet,
  ModeMismatch,
  ConflictingResubmission,
  NotFound,
  Io,
  Transport,
};

constexpr std::string_view to_string(ErrorKind k) noexcept {
  switch (k) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::OverRange: return "OverRange";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::NonPositiveScale: return "NonPositiveScale";
    case ErrorKind::EmptyChannel: return "EmptyChannel";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::NoOverlap: return "NoOverlap";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::EmptyTestSet: return "EmptyTestSet";
    case ErrorKind::ModeMismatch: return "ModeMismatch";
    case ErrorKind::ConflictingResubmission: return "ConflictingResubmission";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Transport: return "Transport";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorKind::InvalidArgument, what);
}

}  // namespace sts
