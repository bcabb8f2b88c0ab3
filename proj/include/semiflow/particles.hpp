#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "semiflow/bump.hpp"
#include "semiflow/errors.hpp"
#include "semiflow/expr.hpp"
#include "semiflow/field.hpp"
#include "semiflow/ode.hpp"
#include "semiflow/rng.hpp"

namespace semiflow {

struct Particle {
  std::vector<double> x;
  double weight = 0.0;
  bool alive = true;
};

struct CloudProvenance {
  std::string density;        ///< source text of the sampled density, or a combinator tag
  std::string sampling_rule;
  std::uint64_t seed = 0;
  std::vector<double> box_lo, box_hi;
};

/// Weighted particle ensemble. Weights are signed; dead particles keep their
/// weight for bookkeeping but contribute nothing to pairings. Particle order
/// is fixed at sampling time and preserved by every operation.
struct ParticleCloud {
  int dim = 1;
  std::vector<Particle> particles;
  CloudProvenance provenance;
  double riemann_error = 0.0;  ///< |S_m - S_{m/2}| of the total weight at sampling time
  std::size_t n_exploded = 0;
  std::size_t n_step_failed = 0;

  std::size_t size() const { return particles.size(); }

  std::size_t alive_count() const {
    std::size_t n = 0;
    for (const auto& p : particles) n += p.alive ? 1 : 0;
    return n;
  }

  double total_weight() const {
    double s = 0.0;
    for (const auto& p : particles) s += p.weight;
    return s;
  }

  double total_abs_weight() const {
    double s = 0.0;
    for (const auto& p : particles) s += std::abs(p.weight);
    return s;
  }

  double alive_weight() const {
    double s = 0.0;
    for (const auto& p : particles)
      if (p.alive) s += p.weight;
    return s;
  }
};

namespace detail {

inline double midpoint_weight_sum(const Expr& density, std::span<const double> lo, std::span<const double> hi,
                                  long m) {
  const std::size_t d = lo.size();
  std::vector<long> idx(d, 0);
  std::vector<double> x(d);
  double cellvol = 1.0;
  for (std::size_t i = 0; i < d; ++i) cellvol *= (hi[i] - lo[i]) / static_cast<double>(m);
  double sum = 0.0;
  for (;;) {
    for (std::size_t i = 0; i < d; ++i) {
      double w = (hi[i] - lo[i]) / static_cast<double>(m);
      x[i] = lo[i] + (static_cast<double>(idx[i]) + 0.5) * w;
    }
    sum += density.eval(x) * cellvol;
    std::size_t i = d;
    while (i > 0) {
      --i;
      if (++idx[i] < m) break;
      idx[i] = 0;
      if (i == 0) return sum;
    }
  }
}

}  // namespace detail

/// Deterministic stratified sampling of a nonnegative density on an axis box.
/// The box splits into m^d equal cells with m = round(n^(1/d)); each cell
/// contributes one particle at its midpoint, displaced uniformly by up to
/// `jitter` cell half-widths when jitter > 0 (seeded; the seed is unused at
/// jitter == 0). Weight is density(x) * cellvolume, so the total weight is a
/// Riemann sum for the density's integral; riemann_error reports how much
/// that sum moves when the per-axis resolution halves. A negative density
/// value at any sample point raises NegativeDensity; signed densities are
/// realized with scale() and merge() instead.
inline ParticleCloud sample_cloud(const Expr& density, std::span<const double> lo, std::span<const double> hi,
                                  long n, std::uint64_t seed = 0, double jitter = 0.0,
                                  std::string label = "") {
  const std::size_t d = lo.size();
  if (d == 0 || hi.size() != d) throw std::invalid_argument("sample_cloud: box must have matching nonzero extents");
  for (std::size_t i = 0; i < d; ++i)
    if (!(lo[i] < hi[i])) throw std::invalid_argument("sample_cloud: box must have positive volume");
  if (n < 1) throw std::invalid_argument("sample_cloud: need at least one particle");
  if (density.max_variable() > static_cast<int>(d))
    throw std::invalid_argument("sample_cloud: density references a variable beyond the box dimension");
  if (!(jitter >= 0.0 && jitter < 1.0)) throw std::invalid_argument("sample_cloud: jitter must be in [0, 1)");

  const long m = std::max(1L, std::lround(std::pow(static_cast<double>(n), 1.0 / static_cast<double>(d))));
  double cellvol = 1.0;
  std::vector<double> width(d);
  for (std::size_t i = 0; i < d; ++i) {
    width[i] = (hi[i] - lo[i]) / static_cast<double>(m);
    cellvol *= width[i];
  }

  ParticleCloud cloud;
  cloud.dim = static_cast<int>(d);
  cloud.provenance.density = std::move(label);
  cloud.provenance.seed = seed;
  cloud.provenance.box_lo.assign(lo.begin(), lo.end());
  cloud.provenance.box_hi.assign(hi.begin(), hi.end());
  {
    char rule[64];
    if (jitter > 0.0)
      std::snprintf(rule, sizeof rule, "stratified-jitter(%g) m=%ld", jitter, m);
    else
      std::snprintf(rule, sizeof rule, "stratified-midpoint m=%ld", m);
    cloud.provenance.sampling_rule = rule;
  }

  Rng rng(seed);
  std::vector<long> idx(d, 0);
  std::vector<double> x(d);
  double sum = 0.0;
  for (;;) {
    for (std::size_t i = 0; i < d; ++i) {
      double mid = lo[i] + (static_cast<double>(idx[i]) + 0.5) * width[i];
      double off = jitter > 0.0 ? jitter * (rng.uniform() - 0.5) * width[i] : 0.0;
      x[i] = mid + off;
    }
    const double v = density.eval(x);
    if (v < 0.0) throw NegativeDensity(x, v);
    cloud.particles.push_back(Particle{x, v * cellvol, true});
    sum += v * cellvol;
    std::size_t i = d;
    bool done = false;
    while (i > 0) {
      --i;
      if (++idx[i] < m) break;
      idx[i] = 0;
      if (i == 0) done = true;
    }
    if (done) break;
  }

  const long m_half = std::max(1L, m / 2);
  cloud.riemann_error = m_half == m ? 0.0 : std::abs(sum - detail::midpoint_weight_sum(density, lo, hi, m_half));
  return cloud;
}

inline ParticleCloud sample_cloud(const std::string& density, std::span<const double> lo,
                                  std::span<const double> hi, long n, std::uint64_t seed = 0,
                                  double jitter = 0.0) {
  Expr e = Expr::parse(density, static_cast<int>(lo.size()));
  return sample_cloud(e, lo, hi, n, seed, jitter, density);
}

inline ParticleCloud sample_cloud(const std::string& density, double lo, double hi, long n,
                                  std::uint64_t seed = 0, double jitter = 0.0) {
  const double a[] = {lo}, b[] = {hi};
  return sample_cloud(density, std::span<const double>(a, 1), std::span<const double>(b, 1), n, seed, jitter);
}

/// Multiplies every weight by `factor`. Combined with merge() this realizes
/// signed densities: rho = rho_plus - rho_minus becomes
/// merge(sample_cloud(rho_plus, ...), scale(sample_cloud(rho_minus, ...), -1)).
inline ParticleCloud scale(ParticleCloud cloud, double factor) {
  for (auto& p : cloud.particles) p.weight *= factor;
  cloud.riemann_error *= std::abs(factor);
  if (!cloud.provenance.density.empty()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", factor);
    cloud.provenance.density = std::string(buf) + " * (" + cloud.provenance.density + ")";
  }
  return cloud;
}

/// Concatenates two clouds over the same space. Provenance records the sum.
inline ParticleCloud merge(ParticleCloud a, const ParticleCloud& b) {
  if (a.dim != b.dim) throw std::invalid_argument("merge: dimension mismatch");
  a.particles.insert(a.particles.end(), b.particles.begin(), b.particles.end());
  a.riemann_error += b.riemann_error;
  a.n_exploded += b.n_exploded;
  a.n_step_failed += b.n_step_failed;
  a.provenance.density = "(" + a.provenance.density + ") + (" + b.provenance.density + ")";
  a.provenance.sampling_rule = "merge";
  return a;
}

/// <f, cloud> = sum of w_i f(x_i) over alive particles, an exact sum in fixed
/// particle order. No smoothing or density estimation is involved.
template <class F>
double pairing(const ParticleCloud& cloud, F&& f) {
  double s = 0.0;
  for (const auto& p : cloud.particles)
    if (p.alive) s += p.weight * f(std::span<const double>(p.x.data(), p.x.size()));
  return s;
}

/// Transports every alive particle along the flow of b for time t, one solve
/// per particle. A particle whose solve explodes or stalls is marked dead at
/// its last computed state; its weight is retained, the rest of the run
/// continues, and the outcome is tallied on the returned cloud. t = 0 returns
/// the cloud unchanged.
inline ParticleCloud pushforward(const ParticleCloud& cloud, const VectorField& b, double t,
                                 const FlowOptions& opts = {}) {
  if (b.dim() != cloud.dim) throw std::invalid_argument("pushforward: field dimension does not match cloud");
  if (!(t >= 0.0)) throw std::invalid_argument("pushforward: t must be >= 0");
  ParticleCloud out = cloud;
  if (t == 0.0) return out;
  FlowOptions o = opts;
  o.record_steps = false;
  const double tf[] = {t};
  for (auto& p : out.particles) {
    if (!p.alive) continue;
    Trajectory traj = integrate(b, p.x, t, o, tf);
    p.x = traj.final_state();
    if (traj.status != FlowStatus::alive) {
      p.alive = false;
      if (traj.status == FlowStatus::exploded)
        ++out.n_exploded;
      else
        ++out.n_step_failed;
    }
  }
  return out;
}

struct WeakIdentityReport {
  double residual = 0.0;       ///< |lhs - time_integral| / (max f * sum of alive |w|)
  double raw = 0.0;            ///< |lhs - time_integral|
  double lhs = 0.0;            ///< <f, u(t)> - <f, y>
  double time_integral = 0.0;  ///< composite Simpson value of s -> <b . grad f, u(s)>
  std::vector<double> nodes;
  std::vector<double> pairings;  ///< <b . grad f, u(s_j)> at each node
  double weight_scale = 0.0;     ///< sum of |w| over alive input particles
  std::size_t n_died = 0;        ///< particles lost before reaching time t
};

/// Measures the weak-identity defect
///   <f, u(t)> - <f, y> - int_0^t <b . grad f, u(s)> ds
/// with u(s) the pushforward of y. Each alive particle is solved once with
/// the Simpson nodes s_j = j t / n_time as output times; snapshots reuse that
/// one trajectory. A particle that dies mid-run contributes to nodes before
/// its death and nothing afterwards. n_time must be even and >= 2.
inline WeakIdentityReport weak_residual(const VectorField& b, const ParticleCloud& y, const BumpFunction& f,
                                        double t, int n_time, const FlowOptions& opts = {}) {
  if (b.dim() != y.dim) throw std::invalid_argument("weak_residual: field dimension does not match cloud");
  if (f.dim() != y.dim) throw std::invalid_argument("weak_residual: test function dimension does not match cloud");
  if (!(t > 0.0)) throw std::invalid_argument("weak_residual: t must be > 0");
  if (n_time < 2 || n_time % 2 != 0) throw std::invalid_argument("weak_residual: n_time must be even and >= 2");

  const std::size_t d = static_cast<std::size_t>(y.dim);
  const std::size_t n = static_cast<std::size_t>(n_time);
  WeakIdentityReport rep;
  rep.nodes.resize(n + 1);
  for (std::size_t j = 0; j <= n; ++j) rep.nodes[j] = t * static_cast<double>(j) / static_cast<double>(n);
  rep.nodes.back() = t;
  rep.pairings.assign(n + 1, 0.0);

  FlowOptions o = opts;
  o.record_steps = false;

  double paired_final = 0.0, paired_init = 0.0;
  std::vector<double> bx(d), grad(d);
  for (const auto& p : y.particles) {
    if (!p.alive) continue;
    rep.weight_scale += std::abs(p.weight);
    paired_init += p.weight * f.value(p.x);
    Trajectory traj = integrate(b, p.x, t, o, rep.nodes);
    std::size_t j = 0;
    for (std::size_t i = 0; i < traj.times.size() && j <= n; ++i) {
      const double ti = traj.times[i];
      while (j <= n && rep.nodes[j] <= ti + 1e-12 * std::max(1.0, ti)) {
        const auto& xs = traj.states[i];
        b.eval(xs, bx);
        f.gradient(xs, grad);
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += bx[k] * grad[k];
        rep.pairings[j] += p.weight * dot;
        if (j == n) paired_final += p.weight * f.value(xs);
        ++j;
      }
    }
    if (traj.status != FlowStatus::alive) ++rep.n_died;
  }

  const double h = t / static_cast<double>(n);
  double simpson = rep.pairings[0] + rep.pairings[n];
  for (std::size_t j = 1; j < n; ++j) simpson += (j % 2 == 1 ? 4.0 : 2.0) * rep.pairings[j];
  simpson *= h / 3.0;

  rep.lhs = paired_final - paired_init;
  rep.time_integral = simpson;
  rep.raw = std::abs(rep.lhs - simpson);
  rep.residual = rep.weight_scale > 0.0 ? rep.raw / (f.max_value() * rep.weight_scale) : 0.0;
  return rep;
}

struct MassAuditRow {
  double t = 0.0;
  double alive_mass = 0.0;  ///< signed weight sum over particles alive at t
  double dead_mass = 0.0;   ///< signed weight sum over particles dead by t
  std::size_t n_alive = 0;
  std::size_t n_dead = 0;
};

/// Death-time bookkeeping along the flow: one solve per alive particle up to
/// times.back(). A particle counts as dead at t once its solve exploded or
/// stalled at an earlier time (explosion time taken from the bracket
/// estimate); killed weight moves to dead_mass and is never renormalized, so
/// every row satisfies alive_mass + dead_mass = total initial weight.
inline std::vector<MassAuditRow> mass_audit(const VectorField& b, const ParticleCloud& y,
                                            const std::vector<double>& times, const FlowOptions& opts = {}) {
  if (b.dim() != y.dim) throw std::invalid_argument("mass_audit: field dimension does not match cloud");
  if (times.empty()) throw std::invalid_argument("mass_audit: need at least one time");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0)) throw std::invalid_argument("mass_audit: times must be >= 0");
    if (i > 0 && !(times[i] > times[i - 1])) throw std::invalid_argument("mass_audit: times must be increasing");
  }

  constexpr double never = std::numeric_limits<double>::infinity();
  std::vector<double> death(y.particles.size(), never);
  FlowOptions o = opts;
  o.record_steps = false;
  for (std::size_t i = 0; i < y.particles.size(); ++i) {
    const auto& p = y.particles[i];
    if (!p.alive) {
      death[i] = -never;
      continue;
    }
    Trajectory traj = integrate(b, p.x, times.back(), o);
    if (traj.status == FlowStatus::exploded)
      death[i] = traj.explosion ? traj.explosion->tau : traj.final_time();
    else if (traj.status == FlowStatus::step_failure)
      death[i] = traj.failure_time;
  }

  std::vector<MassAuditRow> rows;
  rows.reserve(times.size());
  for (double t : times) {
    MassAuditRow row;
    row.t = t;
    for (std::size_t i = 0; i < y.particles.size(); ++i) {
      const double w = y.particles[i].weight;
      if (death[i] > t) {
        row.alive_mass += w;
        ++row.n_alive;
      } else {
        row.dead_mass += w;
        ++row.n_dead;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace semiflow
