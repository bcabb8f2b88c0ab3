#pragma once

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace semiflow {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Syntax error while parsing an expression. `position` is the byte offset
/// into the source string at which the error was detected.
class ParseError : public Error {
 public:
  ParseError(std::size_t position, std::string expected)
      : Error("parse error at offset " + std::to_string(position) + ": expected " + expected),
        position(position),
        expected(std::move(expected)) {}

  std::size_t position;
  std::string expected;
};

/// A parsed expression references a variable outside the declared dimension.
class DimensionError : public Error {
 public:
  DimensionError(std::size_t position, std::string variable, int dimension)
      : Error("dimension error at offset " + std::to_string(position) + ": variable " + variable +
              " not valid in dimension " + std::to_string(dimension)),
        position(position),
        variable(std::move(variable)),
        dimension(dimension) {}

  std::size_t position;
  std::string variable;
  int dimension;
};

/// Domain violation while evaluating an expression (log of a nonpositive
/// value, division by zero, 0^negative, non-finite intermediate, ...).
class EvalError : public Error {
 public:
  EvalError(std::string op, std::size_t position)
      : Error("evaluation error in '" + op + "' at offset " + std::to_string(position)),
        op(std::move(op)),
        position(position) {}

  std::string op;
  std::size_t position;
  std::vector<double> point;  ///< filled in at the evaluation entry point

  void attach_point(const std::vector<double>& p) {
    if (!point.empty()) return;
    point = p;
    std::ostringstream os;
    os << what() << " at point (";
    for (std::size_t i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p[i];
    os << ")";
    message_ = os.str();
  }

  const char* what() const noexcept override {
    return message_.empty() ? Error::what() : message_.c_str();
  }

 private:
  std::string message_;
};

/// The expression is not differentiable at the requested point
/// (|.| at 0, sqrt at 0, x^p with varying exponent and x <= 0, ...).
class DerivativeError : public Error {
 public:
  DerivativeError(std::string op, std::size_t position)
      : Error("derivative undefined in '" + op + "' at offset " + std::to_string(position)),
        op(std::move(op)),
        position(position) {}

  std::string op;
  std::size_t position;
};

/// Adaptive quadrature could not reach the requested tolerance.
class QuadratureFailure : public Error {
 public:
  QuadratureFailure(double a, double b, std::string detail)
      : Error("quadrature failure on [" + std::to_string(a) + ", " + std::to_string(b) + "]: " + detail),
        a(a),
        b(b),
        detail(std::move(detail)) {}

  double a, b;
  std::string detail;
};

/// An integrand that must be of one sign took the wrong sign.
class NonPositiveIntegrand : public Error {
 public:
  NonPositiveIntegrand(double x, double value)
      : Error("integrand nonpositive at x = " + std::to_string(x) + " (value " + std::to_string(value) + ")"),
        x(x),
        value(value) {}

  double x, value;
};

/// A drift that was declared positive (or of known sign) violates that claim.
class SignViolation : public Error {
 public:
  SignViolation(double x, double value)
      : Error("sign violation at x = " + std::to_string(x) + " (value " + std::to_string(value) + ")"),
        x(x),
        value(value) {}

  double x, value;
};

/// Piecewise witness failed the flux matching check at an interior zero.
class GluingFailure : public Error {
 public:
  GluingFailure(double boundary, double flux, double tol)
      : Error("gluing failure at x = " + std::to_string(boundary) + ": |b*h| = " + std::to_string(flux) +
              " exceeds " + std::to_string(tol)),
        boundary(boundary),
        flux(flux),
        tol(tol) {}

  double boundary, flux, tol;
};

/// A radial bound beta must be strictly positive where it is evaluated.
class NonPositiveBound : public Error {
 public:
  NonPositiveBound(double r, double value)
      : Error("radial bound nonpositive at r = " + std::to_string(r) + " (value " + std::to_string(value) + ")"),
        r(r),
        value(value) {}

  double r, value;
};

/// One Lyapunov margin violation observed during certificate checking.
struct MarginViolation {
  double start_radius;
  int direction;
  double t;
  double margin;
};

/// The escape certificate found margins below -tol.
class CertificateFailure : public Error {
 public:
  explicit CertificateFailure(std::vector<MarginViolation> violations)
      : Error(describe(violations)), violations(std::move(violations)) {}

  std::vector<MarginViolation> violations;

 private:
  static std::string describe(const std::vector<MarginViolation>& v) {
    std::ostringstream os;
    os << "escape certificate failed: " << v.size() << " margin violation(s)";
    if (!v.empty()) {
      os << ", worst margin " << v.front().margin << " at t = " << v.front().t << " from radius "
         << v.front().start_radius;
    }
    return os.str();
  }
};

/// |phi(R u)| >= 1: the rank-one perturbation is not small enough.
class SmallnessViolation : public Error {
 public:
  explicit SmallnessViolation(double value)
      : Error("smallness violation: |phi(R u)| = " + std::to_string(value) + " >= 1"), value(value) {}

  double value;
};

/// lambda0 is (numerically) an eigenvalue of L, so the resolvent is singular.
class SingularResolvent : public Error {
 public:
  SingularResolvent(double lambda0, double rcond)
      : Error("singular resolvent at lambda0 = " + std::to_string(lambda0) +
              " (reciprocal condition " + std::to_string(rcond) + ")"),
        lambda0(lambda0),
        rcond(rcond) {}

  double lambda0, rcond;
};

/// Initial density took a negative value at a sampling node.
class NegativeDensity : public Error {
 public:
  NegativeDensity(std::vector<double> where, double value)
      : Error(describe(where, value)), where(std::move(where)), value(value) {}

  std::vector<double> where;
  double value;

 private:
  static std::string describe(const std::vector<double>& w, double v) {
    std::ostringstream os;
    os << "negative density " << v << " at (";
    for (std::size_t i = 0; i < w.size(); ++i) os << (i ? ", " : "") << w[i];
    os << ")";
    return os.str();
  }
};

/// A lab scenario violates one of its structural invariants.
class InvalidScenario : public Error {
 public:
  explicit InvalidScenario(const std::string& detail) : Error("invalid scenario: " + detail) {}
};

/// A scenario file does not conform to the schema. `path` is a JSON pointer
/// to the offending element.
class SchemaError : public Error {
 public:
  SchemaError(std::string path, std::string detail)
      : Error("schema error at " + path + ": " + detail), path(std::move(path)), detail(std::move(detail)) {}

  std::string path;
  std::string detail;
};

/// Filesystem-level problem (missing scenario file, unwritable output, ...).
class IoError : public Error {
 public:
  explicit IoError(const std::string& detail) : Error("io error: " + detail) {}
};

/// A flow-level operation needed a trajectory that stayed alive and did not
/// get one, or the step controller stalled in a context that cannot recover.
class FlowError : public Error {
 public:
  explicit FlowError(const std::string& detail) : Error("flow error: " + detail) {}
};

}  // namespace semiflow
