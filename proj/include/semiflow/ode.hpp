#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semiflow/errors.hpp"
#include "semiflow/field.hpp"

namespace semiflow {

enum class FlowStatus { alive, exploded, step_failure };

inline const char* to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::alive: return "Alive";
    case FlowStatus::exploded: return "Exploded";
    case FlowStatus::step_failure: return "StepFailure";
  }
  return "?";
}

/// Blow-up time estimate: the controller stalled inside [lo, hi] with the
/// state beyond the explosion radius and still growing; tau is the midpoint.
struct ExplosionEstimate {
  double tau = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;

  double bracket_width() const { return bracket_hi - bracket_lo; }
};

struct FlowOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double h_min = 1e-12;       ///< controller stall threshold
  double r_explode = 1e6;     ///< radius beyond which a stall means blow-up
  double h_init = 0.0;        ///< 0 = choose automatically
  long max_steps = 2000000;
  bool record_steps = true;   ///< record every accepted step when no output times are given
};

struct Trajectory {
  FlowStatus status = FlowStatus::alive;
  std::vector<double> times;                 // strictly increasing, starts at 0
  std::vector<std::vector<double>> states;   // states[i] is the state at times[i]
  std::optional<ExplosionEstimate> explosion;
  double failure_time = 0.0;                 // set when status == step_failure
  long steps_accepted = 0;
  long steps_rejected = 0;
  std::string note;

  const std::vector<double>& final_state() const { return states.back(); }
  double final_time() const { return times.back(); }
};

namespace detail {

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

// Dormand-Prince 5(4) tableau.
inline constexpr double dp_a21 = 1.0 / 5;
inline constexpr double dp_a31 = 3.0 / 40, dp_a32 = 9.0 / 40;
inline constexpr double dp_a41 = 44.0 / 45, dp_a42 = -56.0 / 15, dp_a43 = 32.0 / 9;
inline constexpr double dp_a51 = 19372.0 / 6561, dp_a52 = -25360.0 / 2187, dp_a53 = 64448.0 / 6561,
                        dp_a54 = -212.0 / 729;
inline constexpr double dp_a61 = 9017.0 / 3168, dp_a62 = -355.0 / 33, dp_a63 = 46732.0 / 5247,
                        dp_a64 = 49.0 / 176, dp_a65 = -5103.0 / 18656;
inline constexpr double dp_b1 = 35.0 / 384, dp_b3 = 500.0 / 1113, dp_b4 = 125.0 / 192,
                        dp_b5 = -2187.0 / 6784, dp_b6 = 11.0 / 84;
inline constexpr double dp_e1 = 35.0 / 384 - 5179.0 / 57600, dp_e3 = 500.0 / 1113 - 7571.0 / 16695,
                        dp_e4 = 125.0 / 192 - 393.0 / 640, dp_e5 = -2187.0 / 6784 + 92097.0 / 339200,
                        dp_e6 = 11.0 / 84 - 187.0 / 2100, dp_e7 = -1.0 / 40;

}  // namespace detail

/// Solves X' = b(X), X(0) = x0 on [0, t_final] with the adaptive
/// Dormand-Prince 5(4) pair. The error-per-unit-step criterion is
/// ||err|| <= h * (rtol * ||X|| + atol). When `output_times` is nonempty,
/// steps are clamped so those times are hit exactly and only they (plus
/// t = 0 and the final state) are recorded; otherwise every accepted step
/// is recorded (subject to record_steps).
inline Trajectory integrate(const VectorField& b, std::span<const double> x0, double t_final,
                            const FlowOptions& opts = {}, std::span<const double> output_times = {}) {
  const std::size_t d = static_cast<std::size_t>(b.dim());
  if (x0.size() != d) throw std::invalid_argument("integrate: initial state has wrong dimension");
  if (!(t_final >= 0.0)) throw std::invalid_argument("integrate: t_final must be >= 0");

  Trajectory traj;
  std::vector<double> y(x0.begin(), x0.end());
  double t = 0.0;
  traj.times.push_back(0.0);
  traj.states.push_back(y);

  std::vector<double> outputs(output_times.begin(), output_times.end());
  std::sort(outputs.begin(), outputs.end());
  outputs.erase(std::unique(outputs.begin(), outputs.end()), outputs.end());
  std::size_t next_out = 0;
  while (next_out < outputs.size() && outputs[next_out] <= 0.0) ++next_out;
  const bool record_every_step = outputs.empty() && opts.record_steps;

  auto record = [&](bool force) {
    bool due = false;
    while (next_out < outputs.size() && outputs[next_out] <= t + 1e-15 * std::max(1.0, t)) {
      ++next_out;
      due = true;
    }
    if (due || force || record_every_step) {
      if (traj.times.back() < t) {
        traj.times.push_back(t);
        traj.states.push_back(y);
      }
    }
  };

  std::vector<double> k1(d), k2(d), k3(d), k4(d), k5(d), k6(d), k7(d), ytmp(d), y5(d), err(d);
  auto eval = [&](const std::vector<double>& state, std::vector<double>& out) -> bool {
    try {
      b.eval(state, out);
    } catch (const Error&) {
      return false;
    }
    for (double v : out)
      if (std::isnan(v)) return false;
    return true;
  };

  if (t_final == 0.0) return traj;

  // initial step heuristic
  double h = opts.h_init;
  if (h <= 0.0) {
    double d0 = detail::norm2(y);
    double d1 = eval(y, k1) ? detail::norm2(k1) : 0.0;
    h = (d0 > 1e-8 && d1 > 1e-8) ? 0.01 * d0 / d1 : 1e-6;
    h = std::min(h, 0.1 * t_final);
    h = std::max(h, opts.h_min);
  }

  bool have_k1 = eval(y, k1);
  double prev_radius = detail::norm2(y);
  bool radius_growing = false;

  auto stall = [&](double h_attempted) {
    double r = detail::norm2(y);
    if (r >= opts.r_explode && radius_growing) {
      traj.status = FlowStatus::exploded;
      ExplosionEstimate e;
      e.bracket_lo = t;
      e.bracket_hi = t + h_attempted;
      e.tau = t + 0.5 * h_attempted;
      traj.explosion = e;
      traj.note = "step size underflow with growing radius " + std::to_string(r);
    } else {
      traj.status = FlowStatus::step_failure;
      traj.failure_time = t;
      traj.note = "step size underflow at t = " + std::to_string(t);
    }
    record(true);
  };

  while (t < t_final) {
    if (traj.steps_accepted + traj.steps_rejected >= opts.max_steps) {
      traj.status = FlowStatus::step_failure;
      traj.failure_time = t;
      traj.note = "step budget exhausted";
      record(true);
      return traj;
    }
    if (h < opts.h_min) {
      stall(h);
      return traj;
    }
    if (!have_k1 && !eval(y, k1)) {
      // field not evaluable at an accepted state: cannot restart
      traj.status = FlowStatus::step_failure;
      traj.failure_time = t;
      traj.note = "field not evaluable at current state";
      record(true);
      return traj;
    }
    have_k1 = true;

    // clamp to the next target time without disturbing the controller
    double target = t_final;
    if (next_out < outputs.size()) target = std::min(target, outputs[next_out]);
    double h_use = std::min(h, target - t);
    if (h_use <= 0.0) h_use = opts.h_min;

    bool ok = true;
    auto stage = [&](std::vector<double>& dst, auto... terms) {
      auto pairs = std::initializer_list<std::pair<double, const std::vector<double>*>>{terms...};
      for (std::size_t i = 0; i < d; ++i) {
        double acc = y[i];
        for (const auto& [c, k] : pairs) acc += h_use * c * (*k)[i];
        ytmp[i] = acc;
      }
      ok = eval(ytmp, dst);
    };

    using detail::dp_a21, detail::dp_a31, detail::dp_a32, detail::dp_a41, detail::dp_a42, detail::dp_a43,
        detail::dp_a51, detail::dp_a52, detail::dp_a53, detail::dp_a54, detail::dp_a61, detail::dp_a62,
        detail::dp_a63, detail::dp_a64, detail::dp_a65, detail::dp_b1, detail::dp_b3, detail::dp_b4,
        detail::dp_b5, detail::dp_b6;

    stage(k2, std::pair{dp_a21, &k1});
    if (ok) stage(k3, std::pair{dp_a31, &k1}, std::pair{dp_a32, &k2});
    if (ok) stage(k4, std::pair{dp_a41, &k1}, std::pair{dp_a42, &k2}, std::pair{dp_a43, &k3});
    if (ok)
      stage(k5, std::pair{dp_a51, &k1}, std::pair{dp_a52, &k2}, std::pair{dp_a53, &k3}, std::pair{dp_a54, &k4});
    if (ok)
      stage(k6, std::pair{dp_a61, &k1}, std::pair{dp_a62, &k2}, std::pair{dp_a63, &k3}, std::pair{dp_a64, &k4},
            std::pair{dp_a65, &k5});
    double ratio = std::numeric_limits<double>::infinity();
    if (ok) {
      for (std::size_t i = 0; i < d; ++i)
        y5[i] = y[i] + h_use * (dp_b1 * k1[i] + dp_b3 * k3[i] + dp_b4 * k4[i] + dp_b5 * k5[i] + dp_b6 * k6[i]);
      ok = eval(y5, k7);  // FSAL stage
    }
    if (ok) {
      using detail::dp_e1, detail::dp_e3, detail::dp_e4, detail::dp_e5, detail::dp_e6, detail::dp_e7;
      for (std::size_t i = 0; i < d; ++i)
        err[i] = h_use * (dp_e1 * k1[i] + dp_e3 * k3[i] + dp_e4 * k4[i] + dp_e5 * k5[i] + dp_e6 * k6[i] +
                          dp_e7 * k7[i]);
      double scale = opts.rtol * std::max(detail::norm2(y), detail::norm2(y5)) + opts.atol;
      double err_norm = detail::norm2(err);
      ratio = err_norm / (h_use * scale);
    }

    if (!(ratio <= 1.0)) {  // reject (also catches NaN)
      ++traj.steps_rejected;
      double shrink = std::isfinite(ratio) ? std::max(0.2, 0.9 * std::pow(ratio, -0.2)) : 0.2;
      double h_next = h_use * shrink;
      if (h_next < opts.h_min) {
        stall(h_use);
        return traj;
      }
      h = h_next;
      continue;
    }

    // accept
    ++traj.steps_accepted;
    double r_new = detail::norm2(y5);
    radius_growing = r_new > prev_radius;
    prev_radius = r_new;
    y.swap(y5);
    k1.swap(k7);  // FSAL
    t += h_use;
    record(false);

    double grow_factor = std::clamp(ratio > 0.0 ? 0.9 * std::pow(ratio, -0.2) : 5.0, 0.2, 5.0);
    if (h_use < h) {
      // step was clamped to hit a target time; don't let that shrink the controller
      h = std::max(h, h_use * grow_factor);
    } else {
      h = h_use * grow_factor;
    }
  }

  record(true);
  traj.status = FlowStatus::alive;
  return traj;
}

inline Trajectory integrate(const VectorField& b, std::initializer_list<double> x0, double t_final,
                            const FlowOptions& opts = {}, std::span<const double> output_times = {}) {
  return integrate(b, std::span<const double>(x0.begin(), x0.size()), t_final, opts, output_times);
}

struct SemigroupCheck {
  double t = 0.0, s = 0.0;
  double defect = 0.0;   ///< || X_{t+s}(x) - X_s(X_t(x)) ||
  double scale = 1.0;    ///< 1 + || X_{t+s}(x) ||
  double tol = 1e-6;
  bool pass = false;
  std::vector<double> direct, composed;
};

/// Compares the one-shot solve over [0, t+s] against the composition of a
/// solve to t followed by a solve of length s. Both routes must stay alive.
inline SemigroupCheck semigroup_check(const VectorField& b, std::span<const double> x0, double t, double s,
                                      const FlowOptions& opts = {}, double tol = 1e-6) {
  if (!(t >= 0.0) || !(s >= 0.0)) throw std::invalid_argument("semigroup_check: t and s must be >= 0");
  FlowOptions o = opts;
  o.record_steps = false;
  const double both[] = {t + s};
  Trajectory direct = integrate(b, x0, t + s, o, both);
  if (direct.status != FlowStatus::alive)
    throw FlowError(std::string("semigroup_check: direct solve ended ") + to_string(direct.status));
  const double first[] = {t};
  Trajectory leg1 = integrate(b, x0, t, o, first);
  if (leg1.status != FlowStatus::alive)
    throw FlowError(std::string("semigroup_check: first leg ended ") + to_string(leg1.status));
  const double second[] = {s};
  Trajectory leg2 = integrate(b, leg1.final_state(), s, o, second);
  if (leg2.status != FlowStatus::alive)
    throw FlowError(std::string("semigroup_check: second leg ended ") + to_string(leg2.status));

  SemigroupCheck out;
  out.t = t;
  out.s = s;
  out.tol = tol;
  out.direct = direct.final_state();
  out.composed = leg2.final_state();
  double diff = 0.0;
  for (std::size_t i = 0; i < out.direct.size(); ++i) {
    double di = out.direct[i] - out.composed[i];
    diff += di * di;
  }
  out.defect = std::sqrt(diff);
  out.scale = 1.0 + detail::norm2(out.direct);
  out.pass = out.defect <= tol * out.scale;
  return out;
}

inline SemigroupCheck semigroup_check(const VectorField& b, std::initializer_list<double> x0, double t, double s,
                                      const FlowOptions& opts = {}, double tol = 1e-6) {
  return semigroup_check(b, std::span<const double>(x0.begin(), x0.size()), t, s, opts, tol);
}

}  // namespace semiflow
