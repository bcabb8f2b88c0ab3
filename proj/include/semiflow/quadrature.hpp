#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "semiflow/errors.hpp"

namespace semiflow {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;    ///< estimate of the absolute error
  long evaluations = 0;
  bool capped = false;   ///< stopped early because `positive_cap` was reached
};

struct QuadratureOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  int max_depth = 52;
  long max_intervals = 200000;
  /// For integrands known to be nonnegative: stop subdividing once the
  /// accumulated lower bound alone exceeds this value. 0 disables.
  double positive_cap = 0.0;
};

namespace detail {

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1].
inline constexpr std::array<double, 8> gk_nodes = {
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691, 0.7415311855993944,
    0.5860872354676911, 0.4058451513773972, 0.2077849550078985, 0.0,
};
inline constexpr std::array<double, 8> gk_weights = {
    0.0229353220105292, 0.0630920926299786, 0.1047900103222502, 0.1406532597155259,
    0.1690047266392679, 0.1903505780647854, 0.2044329400752989, 0.2094821410847278,
};
inline constexpr std::array<double, 4> gauss_weights = {
    0.1294849661688697, 0.2797053914892767, 0.3818300505051189, 0.4179591836734694,
};

template <class F>
std::pair<double, double> gk15(F&& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  std::array<double, 15> fv;
  fv[7] = f(c);
  for (int i = 0; i < 7; ++i) {
    const double dx = h * gk_nodes[static_cast<std::size_t>(i)];
    fv[static_cast<std::size_t>(i)] = f(c - dx);
    fv[static_cast<std::size_t>(14 - i)] = f(c + dx);
  }
  double kron = gk_weights[7] * fv[7];
  double gauss = gauss_weights[3] * fv[7];
  for (int i = 0; i < 7; ++i) {
    const double pair_sum = fv[static_cast<std::size_t>(i)] + fv[static_cast<std::size_t>(14 - i)];
    kron += gk_weights[static_cast<std::size_t>(i)] * pair_sum;
    if (i % 2 == 1) gauss += gauss_weights[static_cast<std::size_t>(i / 2)] * pair_sum;
  }
  kron *= h;
  gauss *= h;
  double err = std::abs(kron - gauss);
  // standard sharpening of the raw Gauss/Kronrod difference
  if (err != 0.0) err = err * std::min(1.0, std::pow(200.0 * err / std::max(std::abs(kron), 1e-300), 1.5));
  return {kron, err};
}

}  // namespace detail

/// Adaptive quadrature of f over [a, b]. Bisects the interval with the worst
/// local error estimate until |error| <= max(abs_tol, rel_tol * |value|).
/// Throws QuadratureFailure if the tolerance is unreachable within the
/// interval budget, unless the positive cap fires first.
template <class F>
QuadratureResult integrate(F&& f, double a, double b, const QuadratureOptions& opts = {}) {
  if (a == b) return {0.0, 0.0, 0, false};
  if (a > b) {
    QuadratureResult r = integrate(f, b, a, opts);
    r.value = -r.value;
    return r;
  }
  struct Panel {
    double a, b, value, error;
    int depth;
  };
  QuadratureResult res;
  auto eval_panel = [&](double lo, double hi, int depth) {
    auto [v, e] = detail::gk15(f, lo, hi);
    res.evaluations += 15;
    return Panel{lo, hi, v, e, depth};
  };
  std::vector<Panel> panels{eval_panel(a, b, 0)};
  double total = panels[0].value;
  double total_err = panels[0].error;
  long iterations = 0;
  while (true) {
    if (std::isnan(total)) throw QuadratureFailure(a, b, "integrand produced NaN");
    if (total_err <= std::max(opts.abs_tol, opts.rel_tol * std::abs(total))) break;
    if (opts.positive_cap > 0.0 && total - total_err > opts.positive_cap) {
      res.capped = true;
      break;
    }
    auto worst = std::max_element(panels.begin(), panels.end(),
                                  [](const Panel& p, const Panel& q) { return p.error < q.error; });
    if (worst->depth >= opts.max_depth)
      throw QuadratureFailure(worst->a, worst->b, "max subdivision depth reached");
    if (++iterations > opts.max_intervals)
      throw QuadratureFailure(a, b, "interval budget exhausted");
    Panel p = *worst;
    double mid = 0.5 * (p.a + p.b);
    if (mid <= p.a || mid >= p.b)
      throw QuadratureFailure(p.a, p.b, "interval collapsed below floating point resolution");
    Panel left = eval_panel(p.a, mid, p.depth + 1);
    Panel right = eval_panel(mid, p.b, p.depth + 1);
    total += left.value + right.value - p.value;
    total_err += left.error + right.error - p.error;
    *worst = left;
    panels.push_back(right);
  }
  res.value = total;
  res.error = total_err;
  return res;
}

}  // namespace semiflow
