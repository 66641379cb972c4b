#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dynaslide {

enum class ErrorKind {
  MissingField,
  NonPositive,
  DateOutOfWindow,
  NonFinite,
  InvalidConfig,
  UnknownTable,
  UnknownField,
  EmptyProjection,
  UnknownVariable,
  UnboundVariable,
  UnknownFunction,
  UnknownMetric,
  UnboundPlaceholder,
  InvalidBounds,
  UnknownOp,
  MismatchedFieldOps,
  MissingKey,
  InvalidParam,
  InsufficientColumns,
  UnknownSubtemplate,
  RoleMismatch,
  SlotOccupied,
  EmptySeries,
  UnknownRole,
  DegenerateRect,
  ProviderError,
  SchemaViolation,
  NoApplicableTemplate,
  ConflictingTable,
  InsufficientSubtemplates,
  TooFewSubtemplates,
  LengthMismatch,
  IncompleteTrace,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

// Every failure in the library surfaces as an Error carrying a kind that
// callers (and tests) can branch on; what() is "<Kind>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string detail);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace dynaslide
