#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "semiflow/errors.hpp"
#include "semiflow/expr.hpp"
#include "semiflow/quadrature.hpp"

namespace semiflow {

struct GlueProbe {
  double epsilon = 0.0;  // distance from the support boundary
  double x = 0.0;        // probe location (support side)
  double flux = 0.0;     // |b*h| there
};

/// Decaying eigenfunction of the adjoint drift operator on one support
/// interval: h solves -(b h)' = lambda h with h(c) = 1, i.e.
///   h(x) = (b(c) / b(x)) * exp(-lambda * u(x)),   u(x) = int_c^x ds / b(s).
/// Outside (support_lo, support_hi) the function is identically 0. The
/// product b*h = b(c) * exp(-lambda * u(x)) stays bounded through zeros of b,
/// which is what flux() evaluates; it never forms the 0 * inf intermediate.
class Witness {
 public:
  Witness(Expr b, double c, double lambda, double support_lo, double support_hi)
      : b_(std::move(b)), c_(c), lambda_(lambda), lo_(support_lo), hi_(support_hi) {
    if (!(lo_ < hi_)) throw std::invalid_argument("Witness: empty support interval");
    if (!(c_ > lo_ && c_ < hi_)) throw std::invalid_argument("Witness: base point outside support");
    if (!(lambda_ > 0.0)) throw std::invalid_argument("Witness: lambda must be positive");
    bc_ = b_({c_});
    if (bc_ == 0.0 || !std::isfinite(bc_)) throw std::invalid_argument("Witness: b vanishes at the base point");
    checkpoints_[c_] = 0.0;
  }

  double base_point() const { return c_; }
  double lambda() const { return lambda_; }
  double support_lo() const { return lo_; }
  double support_hi() const { return hi_; }
  double b_at_base() const { return bc_; }

  /// u(x) = int_c^x ds / b(s), evaluated incrementally from the nearest
  /// previously computed checkpoint and cached.
  double u(double x) const {
    if (!(x > lo_ && x < hi_)) throw std::invalid_argument("Witness::u: point outside support");
    auto it = checkpoints_.lower_bound(x);
    double x0, u0;
    if (it != checkpoints_.end() && it->first == x) return it->second;
    if (it == checkpoints_.begin()) {
      x0 = it->first;
      u0 = it->second;
    } else if (it == checkpoints_.end()) {
      --it;
      x0 = it->first;
      u0 = it->second;
    } else {
      auto above = it;
      --it;
      if (above->first - x < x - it->first) {
        x0 = above->first;
        u0 = above->second;
      } else {
        x0 = it->first;
        u0 = it->second;
      }
    }
    if (x == x0) return u0;
    QuadratureOptions opts;
    opts.abs_tol = 1e-13;
    opts.rel_tol = 1e-11;
    auto r = integrate([this](double s) { return 1.0 / b_({s}); }, x0, x, opts);
    double val = u0 + r.value;
    checkpoints_[x] = val;
    return val;
  }

  double h(double x) const {
    if (!(x > lo_ && x < hi_)) return 0.0;
    double bx = b_({x});
    return bc_ / bx * std::exp(-lambda_ * u(x));
  }

  /// b(x) * h(x) in its stable product form b(c) * exp(-lambda u(x)).
  double flux(double x) const {
    if (!(x > lo_ && x < hi_)) return 0.0;
    return bc_ * std::exp(-lambda_ * u(x));
  }

  std::vector<std::pair<double, double>> sample_h(double a, double b, int n) const {
    if (n < 2) throw std::invalid_argument("Witness::sample_h: need at least 2 points");
    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      double x = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
      out.emplace_back(x, h(x));
    }
    return out;
  }

  // Diagnostics attached by the analyzer.
  double l1_norm = std::numeric_limits<double>::quiet_NaN();
  double l1_abs_err = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> l1_partials;       // increasing estimates over tail cutoffs
  std::vector<GlueProbe> glue_probes;    // shrinking-epsilon flux values, if a finite boundary exists
  double glue_boundary = std::numeric_limits<double>::quiet_NaN();

 private:
  Expr b_;
  double c_;
  double lambda_;
  double lo_, hi_;
  double bc_;
  mutable std::map<double, double> checkpoints_;
};

}  // namespace semiflow
