#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "semiflow/errors.hpp"
#include "semiflow/expr.hpp"
#include "semiflow/quadrature.hpp"

namespace semiflow {

/// Improper-integral tail: left means (-inf, edge], right and radial mean
/// [edge, +inf). Radial is the same computation as right; it exists so
/// reports can say the integrand was 1/beta over radii rather than 1/b.
struct Tail {
  enum class Kind { left, right, radial } kind;
  double edge;

  static Tail left(double c0) { return {Kind::left, c0}; }
  static Tail right(double cN) { return {Kind::right, cN}; }
  static Tail radial(double r) { return {Kind::radial, r}; }

  /// Point at distance t >= 0 into the tail.
  double at(double t) const { return kind == Kind::left ? edge - t : edge + t; }

  const char* name() const {
    switch (kind) {
      case Kind::left: return "left";
      case Kind::right: return "right";
      case Kind::radial: return "radial";
    }
    return "?";
  }
};

enum class DivergenceKind { diverges, converges, inconclusive };

inline const char* to_string(DivergenceKind k) {
  switch (k) {
    case DivergenceKind::diverges: return "Diverges";
    case DivergenceKind::converges: return "Converges";
    case DivergenceKind::inconclusive: return "Inconclusive";
  }
  return "?";
}

/// One row of evidence: integral of the integrand from the tail edge out to
/// distance `cutoff`, with the accumulated quadrature error estimate.
struct CutoffRecord {
  double cutoff;
  double partial;
  double quad_error;
};

/// Three-valued outcome of the tail-divergence decision, with the evidence
/// that produced it. `value`/`abs_err` are meaningful only for Converges.
struct DivergenceVerdict {
  DivergenceKind kind = DivergenceKind::inconclusive;
  double value = 0.0;
  double abs_err = 0.0;
  std::vector<CutoffRecord> cutoffs;
  double growth_exponent_fit = std::numeric_limits<double>::quiet_NaN();
  bool identically_zero = false;       ///< vanishing-part convention fired
  bool threshold_rule = false;         ///< partials exceeded M
  bool exponent_rule = false;          ///< slow-decay fit fired at k_max
  bool exact_mode = false;
  std::string detail;
};

struct DivergenceOptions {
  double t0 = 1.0;          ///< first cutoff distance
  int k_max = 48;           ///< cutoffs t0 * 2^k, k = 0..k_max
  double cauchy_tol = 1e-9; ///< Converges needs the last two deltas below this
  double threshold_m = 1e3; ///< Diverges once partials exceed this
  double fit_tol = 0.05;    ///< Diverges when fitted exponent >= -1 - fit_tol and still growing
  int fit_window = 6;       ///< cutoffs used for the log-log tail fit
  std::optional<Expr> antiderivative;  ///< exact mode: F with F' = integrand on the tail
};

namespace detail {

// Clamp huge positive values so panel sums stay finite; the divergence
// threshold M is far below the clamp, so verdicts are unaffected.
inline constexpr double integrand_clamp = 1e300;

inline double fit_log_slope(const std::vector<std::pair<double, double>>& pts) {
  // least squares slope of log(f) against log(t)
  if (pts.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [t, f] : pts) {
    double lx = std::log(t), ly = std::log(f);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double n = static_cast<double>(pts.size());
  double den = n * sxx - sx * sx;
  if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / den;
}

}  // namespace detail

/// Decides whether the improper integral of `integrand` over the tail
/// diverges, converges, or cannot be classified, by integrating to
/// geometrically growing cutoffs. The integrand must be nonnegative on the
/// examined part of the tail; an identically-zero integrand is reported as
/// Diverges by the vanishing-part convention, and an isolated zero among
/// otherwise positive probes is rejected. With `opts.antiderivative` set,
/// partial integrals are antiderivative differences instead of quadrature
/// (the antiderivative is verified against the integrand first).
inline DivergenceVerdict divergence_test(const Expr& integrand, Tail tail, DivergenceOptions opts = {}) {
  if (integrand.max_variable() > 1)
    throw std::invalid_argument("divergence_test: integrand must be one-dimensional");

  auto value_at = [&](double x) { return integrand({x}); };

  DivergenceVerdict verdict;
  verdict.exact_mode = opts.antiderivative.has_value();

  bool all_zero = true;
  bool saw_zero = false;
  double first_zero_x = 0.0;
  double last_positive = std::numeric_limits<double>::infinity();
  auto probe = [&](double t) {
    double x = tail.at(t);
    double v = value_at(x);
    if (v < 0.0) throw NonPositiveIntegrand(x, v);
    if (v == 0.0) {
      // a zero reached after the integrand already decayed below 1e-200 is
      // underflow, not sign structure
      if (last_positive >= 1e-200) {
        if (!saw_zero) first_zero_x = x;
        saw_zero = true;
      }
    } else {
      all_zero = false;
      last_positive = v;
    }
  };
  auto reject_mixed_signs = [&]() {
    if (!all_zero && saw_zero) throw NonPositiveIntegrand(first_zero_x, 0.0);
  };

  // probes between the edge and the first cutoff
  for (int j = 8; j >= 1; --j) probe(opts.t0 * std::pow(2.0, -j));
  reject_mixed_signs();

  if (opts.antiderivative && opts.antiderivative->max_variable() > 1)
    throw InvalidScenario("antiderivative must be one-dimensional");
  auto verify_antiderivative_at = [&](double t) {
    if (!opts.antiderivative) return;
    double x = tail.at(t);
    double f;
    try {
      f = value_at(x);
    } catch (const Error&) {
      return;
    }
    if (!std::isfinite(f)) return;
    auto [fv, fd] = opts.antiderivative->eval_with_derivative(std::vector<double>{x}, 1);
    (void)fv;
    if (!std::isfinite(fd)) return;
    if (std::abs(fd - f) > 1e-6 * std::max({1.0, std::abs(fd), std::abs(f)}))
      throw InvalidScenario("antiderivative mismatch at x = " + std::to_string(x) + ": F' = " +
                            std::to_string(fd) + " vs integrand " + std::to_string(f));
  };

  auto panel_value = [&](double t_lo, double t_hi) -> std::pair<double, double> {
    if (opts.antiderivative) {
      const Expr& F = *opts.antiderivative;
      double a = tail.at(t_lo), b = tail.at(t_hi);
      double fa = F({a}), fb = F({b});
      double v = tail.kind == Tail::Kind::left ? fa - fb : fb - fa;
      return {v, 0.0};
    }
    QuadratureOptions q;
    q.abs_tol = opts.cauchy_tol * 1e-3;
    q.rel_tol = 1e-10;
    q.positive_cap = opts.threshold_m;
    auto clamped = [&](double x) { return std::min(value_at(x), detail::integrand_clamp); };
    auto r = integrate(clamped, tail.at(t_lo), tail.at(t_hi), q);
    double v = tail.kind == Tail::Kind::left ? -r.value : r.value;
    return {v, r.error};
  };

  double partial = 0.0, quad_err = 0.0;
  double t_prev = 0.0;
  for (int k = 0; k <= opts.k_max; ++k) {
    double t_k = opts.t0 * std::pow(2.0, k);

    // positivity probes inside this panel before touching it
    for (double frac : {0.1, 0.3, 0.5, 0.75, 1.0}) probe(t_prev + (t_k - t_prev) * frac);
    reject_mixed_signs();
    if (all_zero) {
      verdict.cutoffs.push_back({t_k, 0.0, 0.0});
      t_prev = t_k;
      if (k == 8) {
        verdict.kind = DivergenceKind::diverges;
        verdict.identically_zero = true;
        verdict.detail = "integrand identically zero on the examined tail: condition satisfied by convention";
        return verdict;
      }
      continue;
    }

    verify_antiderivative_at(t_prev + (t_k - t_prev) * 0.6);
    auto [v, e] = panel_value(t_prev, t_k);
    partial += v;
    quad_err += e;
    verdict.cutoffs.push_back({t_k, partial, quad_err});
    t_prev = t_k;

    if (std::isnan(partial)) {
      verdict.kind = DivergenceKind::inconclusive;
      verdict.detail = "partial integral became NaN at cutoff " + std::to_string(t_k);
      return verdict;
    }
    if (partial > opts.threshold_m) {
      verdict.kind = DivergenceKind::diverges;
      verdict.threshold_rule = true;
      verdict.detail = "partial integral exceeded M at cutoff " + std::to_string(t_k);
      return verdict;
    }
    const auto& c = verdict.cutoffs;
    if (c.size() >= 3) {
      double d1 = std::abs(c[c.size() - 1].partial - c[c.size() - 2].partial);
      double d2 = std::abs(c[c.size() - 2].partial - c[c.size() - 3].partial);
      if (d1 < opts.cauchy_tol && d2 < opts.cauchy_tol) {
        verdict.kind = DivergenceKind::converges;
        verdict.value = partial;
        verdict.abs_err = quad_err + 2.0 * std::max(d1, d2);
        verdict.detail = "partials Cauchy across the last three cutoffs";
        return verdict;
      }
    }
  }

  // cutoff budget exhausted: fit the tail decay rate of the integrand
  {
    std::vector<std::pair<double, double>> pts;
    int lo = std::max(0, opts.k_max - opts.fit_window + 1);
    for (int k = lo; k <= opts.k_max; ++k) {
      double t = opts.t0 * std::pow(2.0, k);
      double f;
      try {
        f = std::min(value_at(tail.at(t)), detail::integrand_clamp);
      } catch (const Error&) {
        continue;
      }
      if (f > 0.0 && std::isfinite(f)) pts.emplace_back(t, f);
    }
    verdict.growth_exponent_fit = detail::fit_log_slope(pts);
  }
  const auto& c = verdict.cutoffs;
  double last_delta = std::abs(c[c.size() - 1].partial - c[c.size() - 2].partial);
  bool still_growing = last_delta > opts.cauchy_tol;
  if (still_growing && verdict.growth_exponent_fit >= -1.0 - opts.fit_tol) {
    verdict.kind = DivergenceKind::diverges;
    verdict.exponent_rule = true;
    verdict.detail = "fitted tail exponent " + std::to_string(verdict.growth_exponent_fit) +
                     " >= -1 with partials still growing";
    return verdict;
  }
  verdict.kind = DivergenceKind::inconclusive;
  verdict.detail = "neither rule fired within the cutoff budget (fitted exponent " +
                   std::to_string(verdict.growth_exponent_fit) + ")";
  return verdict;
}

}  // namespace semiflow
