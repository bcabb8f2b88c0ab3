#pragma once

#include <cmath>

namespace semiflow {

/// First-order dual number for forward-mode differentiation.
/// Arithmetic here is total; domain checking is the evaluator's job.
struct Dual {
  double val = 0.0;
  double der = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double v) : val(v) {}
  constexpr Dual(double v, double d) : val(v), der(d) {}
};

constexpr Dual operator+(Dual a, Dual b) { return {a.val + b.val, a.der + b.der}; }
constexpr Dual operator-(Dual a, Dual b) { return {a.val - b.val, a.der - b.der}; }
constexpr Dual operator-(Dual a) { return {-a.val, -a.der}; }
constexpr Dual operator*(Dual a, Dual b) { return {a.val * b.val, a.der * b.val + a.val * b.der}; }
constexpr Dual operator/(Dual a, Dual b) {
  return {a.val / b.val, (a.der * b.val - a.val * b.der) / (b.val * b.val)};
}

inline Dual sin(Dual a) { return {std::sin(a.val), std::cos(a.val) * a.der}; }
inline Dual cos(Dual a) { return {std::cos(a.val), -std::sin(a.val) * a.der}; }
inline Dual exp(Dual a) {
  double e = std::exp(a.val);
  return {e, e * a.der};
}
inline Dual log(Dual a) { return {std::log(a.val), a.der / a.val}; }
inline Dual sqrt(Dual a) {
  double s = std::sqrt(a.val);
  return {s, a.der / (2.0 * s)};
}
inline Dual atan(Dual a) { return {std::atan(a.val), a.der / (1.0 + a.val * a.val)}; }
inline Dual tanh(Dual a) {
  double t = std::tanh(a.val);
  return {t, (1.0 - t * t) * a.der};
}

inline double value_of(double x) { return x; }
inline double value_of(Dual x) { return x.val; }

}  // namespace semiflow
