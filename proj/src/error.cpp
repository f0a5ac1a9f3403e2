#include "hbn/error.hpp"

namespace hbn {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DegenerateLevels: return "DegenerateLevels";
    case ErrorKind::BelowZeroFieldSplitting: return "BelowZeroFieldSplitting";
    case ErrorKind::ContrastOverflow: return "ContrastOverflow";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::TooFewDips: return "TooFewDips";
    case ErrorKind::StepTooLarge: return "StepTooLarge";
    case ErrorKind::NoPolarization: return "NoPolarization";
    case ErrorKind::MalformedSequence: return "MalformedSequence";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::UnknownUnit: return "UnknownUnit";
    case ErrorKind::MultipleSweepPlaceholders: return "MultipleSweepPlaceholders";
    case ErrorKind::EnergyOutOfRange: return "EnergyOutOfRange";
    case ErrorKind::EmptyHistogram: return "EmptyHistogram";
    case ErrorKind::QuadratureNotConverged: return "QuadratureNotConverged";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace hbn
