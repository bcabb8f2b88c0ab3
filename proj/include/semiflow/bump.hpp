#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace semiflow {

/// Smooth compactly supported test function
///   f(x) = exp(1 - 1/(1 - r^2)),  r = |x - center| / radius < 1,
/// and 0 outside the closed ball. f(center) = 1 and f vanishes with all
/// derivatives at the boundary, so f and its gradient are continuous.
class BumpFunction {
 public:
  BumpFunction(std::vector<double> center, double radius) : center_(std::move(center)), radius_(radius) {
    if (center_.empty()) throw std::invalid_argument("BumpFunction: empty center");
    if (!(radius_ > 0.0)) throw std::invalid_argument("BumpFunction: radius must be positive");
  }

  BumpFunction(double center, double radius) : BumpFunction(std::vector<double>{center}, radius) {}

  int dim() const { return static_cast<int>(center_.size()); }
  double radius() const { return radius_; }
  const std::vector<double>& center() const { return center_; }
  double max_value() const { return 1.0; }

  double support_lo(int i) const { return center_.at(static_cast<std::size_t>(i)) - radius_; }
  double support_hi(int i) const { return center_.at(static_cast<std::size_t>(i)) + radius_; }

  double value(std::span<const double> x) const {
    double rho2 = rho_squared(x);
    if (rho2 >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - rho2));
  }

  double value(double x) const { return value(std::span<const double>(&x, 1)); }

  double operator()(std::span<const double> x) const { return value(x); }
  double operator()(double x) const { return value(x); }

  /// Gradient, also in closed form:
  /// df/dx_i = -2 (x_i - c_i) / (radius^2 (1-rho^2)^2) * f(x).
  void gradient(std::span<const double> x, std::span<double> out) const {
    double rho2 = rho_squared(x);
    if (rho2 >= 1.0) {
      for (auto& v : out) v = 0.0;
      return;
    }
    double t = 1.0 - rho2;
    double f = std::exp(1.0 - 1.0 / t);
    double k = -2.0 * f / (radius_ * radius_ * t * t);
    for (std::size_t i = 0; i < center_.size(); ++i) out[i] = k * (x[i] - center_[i]);
  }

  std::vector<double> gradient(std::span<const double> x) const {
    std::vector<double> out(center_.size());
    gradient(x, out);
    return out;
  }

  double derivative(double x) const {
    double g = 0.0;
    gradient(std::span<const double>(&x, 1), std::span<double>(&g, 1));
    return g;
  }

 private:
  double rho_squared(std::span<const double> x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < center_.size(); ++i) {
      double d = (x[i] - center_[i]) / radius_;
      s += d * d;
    }
    return s;
  }

  std::vector<double> center_;
  double radius_;
};

}  // namespace semiflow
