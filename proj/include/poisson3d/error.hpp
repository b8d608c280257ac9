#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>

namespace poisson3d {

using Point = std::array<double, 3>;
using Vec3 = std::array<double, 3>;

enum class ErrorKind {
  syntax,
  unknown_identifier,
  unbound_variable,
  domain,                // non-finite evaluation or point outside the domain
  precondition,
  out_of_range,          // inverse-function target outside the image
  primitive_mismatch,    // psi' != phi
  vanishing,             // a function required nonvanishing vanishes
  hypothesis_violation,  // chart/theorem hypothesis fails at a point
  consistency,           // rank structure impossible for a family member
  undefined_at_point,    // Casimir denominator below threshold
  branch_mismatch,
  reparam_breakdown,
  degenerate_parameters,
  domain_exit,
  invalid_spec,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::syntax: return "syntax";
    case ErrorKind::unknown_identifier: return "unknown-identifier";
    case ErrorKind::unbound_variable: return "unbound-variable";
    case ErrorKind::domain: return "domain-error";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::out_of_range: return "out-of-range";
    case ErrorKind::primitive_mismatch: return "primitive-mismatch";
    case ErrorKind::vanishing: return "vanishing";
    case ErrorKind::hypothesis_violation: return "hypothesis-violation";
    case ErrorKind::consistency: return "consistency-alarm";
    case ErrorKind::undefined_at_point: return "undefined-at-point";
    case ErrorKind::branch_mismatch: return "branch-mismatch";
    case ErrorKind::reparam_breakdown: return "reparametrization-breakdown";
    case ErrorKind::degenerate_parameters: return "degenerate-parameters";
    case ErrorKind::domain_exit: return "domain-exit";
    case ErrorKind::invalid_spec: return "invalid-spec";
  }
  return "unknown";
}

/// Library-wide exception. `kind` lets callers (and the CLI exit-code
/// mapping) branch on the failure category without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Syntax error carrying the byte offset into the parsed source.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, const std::string& what)
      : Error(ErrorKind::syntax, what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

inline std::string format_point(const Point& x) {
  return "(" + std::to_string(x[0]) + ", " + std::to_string(x[1]) + ", " + std::to_string(x[2]) + ")";
}

}  // namespace poisson3d
