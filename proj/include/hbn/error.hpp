#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hbn {

/// Every failure the toolkit reports is one of these kinds. The CLI maps
/// kinds onto process exit codes.
enum class ErrorKind {
  InvalidArgument,
  DegenerateLevels,
  BelowZeroFieldSplitting,
  ContrastOverflow,
  SingularJacobian,
  NotConverged,
  DimensionMismatch,
  TooFewDips,
  StepTooLarge,
  NoPolarization,
  MalformedSequence,
  SyntaxError,
  UnknownUnit,
  MultipleSweepPlaceholders,
  EnergyOutOfRange,
  EmptyHistogram,
  QuadratureNotConverged,
  ConfigError,
  ParseError,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace hbn
