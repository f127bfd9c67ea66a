#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mflq {

enum class ErrorKind {
  DimensionMismatch,
  NonFiniteEntry,
  NonPositiveHorizon,
  AsymmetricWeight,
  UnknownPreset,
  SingularInverse,
  PreconditionViolated,
  CapExceeded,
  StructureViolation,
  NonFiniteState,
  InvalidArgument,
  ConfigError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFiniteEntry: return "NonFiniteEntry";
    case ErrorKind::NonPositiveHorizon: return "NonPositiveHorizon";
    case ErrorKind::AsymmetricWeight: return "AsymmetricWeight";
    case ErrorKind::UnknownPreset: return "UnknownPreset";
    case ErrorKind::SingularInverse: return "SingularInverse";
    case ErrorKind::PreconditionViolated: return "PreconditionViolated";
    case ErrorKind::CapExceeded: return "CapExceeded";
    case ErrorKind::StructureViolation: return "StructureViolation";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Contract violation raised by the library. Solver failures that are
/// legitimate answers (loss of positivity, blow-up) are reported through
/// `Outcome` instead.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mflq
