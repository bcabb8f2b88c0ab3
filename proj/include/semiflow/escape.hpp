#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "semiflow/divergence.hpp"
#include "semiflow/errors.hpp"
#include "semiflow/expr.hpp"
#include "semiflow/field.hpp"
#include "semiflow/ode.hpp"
#include "semiflow/quadrature.hpp"
#include "semiflow/rng.hpp"

namespace semiflow {

/// h(r) = int_R^r ds / beta(s), evaluated by adaptive quadrature from the
/// nearest previously computed radius, so repeated certificate lookups pay
/// only for the new stretch. Non-positive beta at a quadrature sample raises
/// NonPositiveBound.
class RadialLyapunov {
 public:
  explicit RadialLyapunov(RadialBound bound) : bound_(std::move(bound)) {
    cache_[bound_.inner_radius()] = 0.0;
  }

  double operator()(double r) const {
    auto hi = cache_.lower_bound(r);
    if (hi != cache_.end() && hi->first == r) return hi->second;
    auto anchor = hi;
    if (hi == cache_.end())
      anchor = std::prev(hi);
    else if (hi != cache_.begin() && r - std::prev(hi)->first < hi->first - r)
      anchor = std::prev(hi);
    QuadratureOptions q;
    q.abs_tol = 1e-12;
    q.rel_tol = 1e-10;
    auto f = [this](double s) { return 1.0 / bound_(s); };
    const double value = anchor->second + integrate(f, anchor->first, r, q).value;
    cache_[r] = value;
    return value;
  }

  std::vector<std::pair<double, double>> table() const {
    return {cache_.begin(), cache_.end()};
  }

 private:
  RadialBound bound_;
  mutable std::map<double, double> cache_;
};

struct CheckedPoint {
  double start_radius = 0.0;
  int direction = 0;   ///< index into the sampled direction set
  double t = 0.0;
  double radius = 0.0;  ///< |X_t(x)|
  double h_at_state = 0.0;   ///< h(|X_t(x)|)
  double budget = 0.0;       ///< h(|x|) - t
  double margin = 0.0;       ///< h_at_state - budget
};

struct RadiusTrend {
  double start_radius = 0.0;
  double min_final_radius = 0.0;  ///< min over directions of |X| at the run's end
};

struct EscapeCertificate {
  explicit EscapeCertificate(RadialBound b) : bound(std::move(b)) {}

  RadialBound bound;
  DivergenceVerdict tail;  ///< divergence_test of 1/beta on the radial tail
  std::vector<std::pair<double, double>> h_table;
  std::vector<CheckedPoint> checked;
  double min_margin = 0.0;
  std::size_t n_exploded = 0;
  std::size_t n_entered_core = 0;  ///< trajectories that dipped below the inner radius
  std::vector<RadiusTrend> trend;
  bool trend_nondecreasing = true;  ///< reported, not asserted
};

struct EscapeOptions {
  int n_directions = 32;
  std::uint64_t seed = 2026;
  double tol_cert = 1e-6;
  FlowOptions flow;
  DivergenceOptions tail_options;
};

/// Certifies the non-explosion-from-infinity inequality h(|X_t(x)|) >= h(|x|) - t
/// on a lattice of starting points: each radius in test_radii crossed with a
/// deterministic sphere direction set, sampled along the adaptive trajectory
/// up to t_max. Checks stop for a trajectory once it explodes or once it
/// enters the inner radius, where the comparison argument makes no claim.
/// Margins below -tol_cert abort with CertificateFailure listing the
/// violations, worst first. The 1/beta radial tail must test Diverges.
inline EscapeCertificate escape_certificate(const VectorField& b, const RadialBound& bound,
                                            const std::vector<double>& test_radii, double t_max,
                                            const EscapeOptions& opts = {}) {
  if (test_radii.empty()) throw InvalidScenario("escape certificate needs at least one test radius");
  for (double r : test_radii)
    if (!(r > bound.inner_radius()))
      throw InvalidScenario("test radius " + std::to_string(r) + " is not beyond the inner radius");
  if (!(t_max > 0.0)) throw InvalidScenario("escape certificate horizon must be positive");

  EscapeCertificate cert(bound);
  cert.tail = divergence_test(Expr::constant(1.0) / bound.expr(), Tail::radial(bound.inner_radius()),
                              opts.tail_options);
  if (cert.tail.kind != DivergenceKind::diverges)
    throw InvalidScenario(std::string("1/beta tail must diverge for the escape argument; divergence test said ") +
                          to_string(cert.tail.kind));

  RadialLyapunov h(bound);
  const int d = b.dim();
  const auto directions = sphere_directions(d, opts.n_directions, opts.seed);
  std::vector<MarginViolation> violations;
  cert.min_margin = std::numeric_limits<double>::infinity();

  std::vector<double> radii = test_radii;
  std::sort(radii.begin(), radii.end());
  std::vector<double> x0(static_cast<std::size_t>(d));
  for (double r0 : radii) {
    const double h0 = h(r0);
    RadiusTrend trend_row;
    trend_row.start_radius = r0;
    trend_row.min_final_radius = std::numeric_limits<double>::infinity();
    for (int di = 0; di < static_cast<int>(directions.size()); ++di) {
      for (int i = 0; i < d; ++i) x0[static_cast<std::size_t>(i)] = r0 * directions[static_cast<std::size_t>(di)][static_cast<std::size_t>(i)];
      Trajectory traj = integrate(b, x0, t_max, opts.flow);
      if (traj.status == FlowStatus::exploded) ++cert.n_exploded;
      double final_radius = r0;
      for (std::size_t si = 0; si < traj.times.size(); ++si) {
        const double rho = detail::norm2(traj.states[si]);
        final_radius = rho;
        if (rho < bound.inner_radius()) {
          ++cert.n_entered_core;
          break;
        }
        CheckedPoint cp;
        cp.start_radius = r0;
        cp.direction = di;
        cp.t = traj.times[si];
        cp.radius = rho;
        cp.h_at_state = h(rho);
        cp.budget = h0 - traj.times[si];
        cp.margin = cp.h_at_state - cp.budget;
        cert.min_margin = std::min(cert.min_margin, cp.margin);
        if (cp.margin < -opts.tol_cert)
          violations.push_back(MarginViolation{r0, di, cp.t, cp.margin});
        cert.checked.push_back(cp);
      }
      trend_row.min_final_radius = std::min(trend_row.min_final_radius, final_radius);
    }
    cert.trend.push_back(trend_row);
  }

  for (std::size_t i = 1; i < cert.trend.size(); ++i)
    if (cert.trend[i].min_final_radius < cert.trend[i - 1].min_final_radius)
      cert.trend_nondecreasing = false;

  cert.h_table = h.table();
  if (!violations.empty()) {
    std::sort(violations.begin(), violations.end(),
              [](const MarginViolation& a, const MarginViolation& b) { return a.margin < b.margin; });
    throw CertificateFailure(std::move(violations));
  }
  return cert;
}

}  // namespace semiflow
