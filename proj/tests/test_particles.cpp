#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "semiflow/bump.hpp"
#include "semiflow/errors.hpp"
#include "semiflow/expr.hpp"
#include "semiflow/field.hpp"
#include "semiflow/particles.hpp"
#include "semiflow/quadrature.hpp"

using semiflow::BumpFunction;
using semiflow::Expr;
using semiflow::mass_audit;
using semiflow::MassAuditRow;
using semiflow::merge;
using semiflow::NegativeDensity;
using semiflow::pairing;
using semiflow::ParticleCloud;
using semiflow::pushforward;
using semiflow::sample_cloud;
using semiflow::scale;
using semiflow::VectorField;
using semiflow::weak_residual;
using semiflow::WeakIdentityReport;

namespace {

const char* kBumpDensity = "exp(1 - 1 / (1 - x1 * x1 / 4))";

double bump_density_integral() {
  Expr e = Expr::parse(kBumpDensity, 1);
  auto f = [&](double x) {
    if (std::abs(x) >= 2.0) return 0.0;
    return e({x});
  };
  semiflow::QuadratureOptions q;
  q.abs_tol = 1e-12;
  q.rel_tol = 1e-10;
  return semiflow::integrate(f, -2.0, 2.0, q).value;
}

}  // namespace

TEST_CASE("stratified sampling reproduces the density integral", "[particles]") {
  ParticleCloud cloud = sample_cloud(kBumpDensity, -2.0, 2.0, 10000);
  REQUIRE(cloud.size() == 10000);
  REQUIRE(cloud.alive_count() == 10000);
  const double oracle = bump_density_integral();
  CHECK(std::abs(cloud.total_weight() - oracle) <= 1e-3);
  CHECK(cloud.riemann_error <= 1e-3);
  CHECK(cloud.riemann_error > 0.0);
  CHECK(cloud.provenance.density == kBumpDensity);
  CHECK(cloud.provenance.sampling_rule == "stratified-midpoint m=10000");
  CHECK(cloud.provenance.box_lo == std::vector<double>{-2.0});
  CHECK(cloud.provenance.box_hi == std::vector<double>{2.0});
}

TEST_CASE("sampling is deterministic", "[particles]") {
  ParticleCloud a = sample_cloud(kBumpDensity, -2.0, 2.0, 500);
  ParticleCloud b = sample_cloud(kBumpDensity, -2.0, 2.0, 500);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.particles[i].x == b.particles[i].x);
    CHECK(a.particles[i].weight == b.particles[i].weight);
  }
}

TEST_CASE("zero density gives zero weights", "[particles]") {
  ParticleCloud cloud = sample_cloud("0", -1.0, 1.0, 100);
  REQUIRE(cloud.size() == 100);
  for (const auto& p : cloud.particles) CHECK(p.weight == 0.0);
  CHECK(cloud.total_weight() == 0.0);
  CHECK(cloud.riemann_error == 0.0);
}

TEST_CASE("single particle sits at the box midpoint", "[particles]") {
  ParticleCloud cloud = sample_cloud("1 + x1", -2.0, 6.0, 1);
  REQUIRE(cloud.size() == 1);
  CHECK(cloud.particles[0].x == std::vector<double>{2.0});
  CHECK(cloud.particles[0].weight == 3.0 * 8.0);
}

TEST_CASE("negative density is rejected with the offending point", "[particles]") {
  try {
    sample_cloud("0 - x1", -2.0, 2.0, 100);
    FAIL("expected NegativeDensity");
  } catch (const NegativeDensity& e) {
    REQUIRE(e.where.size() == 1);
    CHECK(e.where[0] > 0.0);
    CHECK(e.value < 0.0);
  }
}

TEST_CASE("two-dimensional sampling uses a square lattice", "[particles]") {
  const double lo[] = {0.0, 0.0}, hi[] = {1.0, 2.0};
  ParticleCloud cloud = sample_cloud("1", std::span<const double>(lo, 2), std::span<const double>(hi, 2), 100);
  REQUIRE(cloud.size() == 100);  // 10 x 10
  CHECK(std::abs(cloud.total_weight() - 2.0) <= 1e-12);
  CHECK(cloud.particles[0].x[0] == 0.05);
  CHECK(cloud.particles[0].x[1] == 0.1);
}

TEST_CASE("signed densities come from scale and merge", "[particles]") {
  ParticleCloud plus = sample_cloud("(x1 + abs(x1)) / 2", -1.0, 1.0, 1000);
  ParticleCloud minus = sample_cloud("(abs(x1) - x1) / 2", -1.0, 1.0, 1000);
  ParticleCloud signedc = merge(plus, scale(minus, -1.0));
  REQUIRE(signedc.size() == 2000);
  CHECK(std::abs(signedc.total_weight() - 0.0) <= 2e-3);  // integral of x over [-1,1]
  CHECK(std::abs(signedc.total_abs_weight() - 1.0) <= 2e-3);
  // <f, signed cloud> ~= integral of x f(x), an odd integrand against a centered bump
  BumpFunction f(0.0, 0.5);
  CHECK(std::abs(pairing(signedc, f)) <= 1e-6);
}

TEST_CASE("pushforward along a linear contraction matches the exact flow", "[particles]") {
  ParticleCloud cloud = sample_cloud(kBumpDensity, -2.0, 2.0, 400);
  auto b = VectorField::parse(1, {"0 - x1"});
  const double t = 0.7;
  ParticleCloud moved = pushforward(cloud, b, t);
  REQUIRE(moved.alive_count() == cloud.size());
  CHECK(moved.n_exploded == 0);
  CHECK(moved.n_step_failed == 0);

  BumpFunction f(0.3, 1.1);
  const double shrink = std::exp(-t);
  double oracle = 0.0;
  for (const auto& p : cloud.particles) oracle += p.weight * f.value(p.x[0] * shrink);
  CHECK(std::abs(pairing(moved, f) - oracle) <= 1e-8);
  // weights are transported untouched
  for (std::size_t i = 0; i < cloud.size(); ++i) CHECK(moved.particles[i].weight == cloud.particles[i].weight);
}

TEST_CASE("pushforward at t = 0 is the identity", "[particles]") {
  ParticleCloud cloud = sample_cloud(kBumpDensity, -2.0, 2.0, 50);
  auto b = VectorField::parse(1, {"x1 * x1"});
  ParticleCloud same = pushforward(cloud, b, 0.0);
  REQUIRE(same.size() == cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(same.particles[i].x == cloud.particles[i].x);
    CHECK(same.particles[i].weight == cloud.particles[i].weight);
    CHECK(same.particles[i].alive);
  }
}

TEST_CASE("blow-up kills every particle but keeps the weights", "[particles]") {
  ParticleCloud cloud = sample_cloud("1", 1.0, 2.0, 64);
  auto b = VectorField::parse(1, {"x1 * x1"});  // escapes at tau = 1/x0 <= 1
  ParticleCloud after = pushforward(cloud, b, 1.1);
  CHECK(after.alive_count() == 0);
  CHECK(after.n_exploded == after.size());
  CHECK(after.n_step_failed == 0);
  CHECK(after.alive_weight() == 0.0);
  CHECK(std::abs(after.total_weight() - cloud.total_weight()) <= 1e-15);
  for (const auto& p : after.particles) CHECK(p.x[0] >= 1e5);  // died far out
  // dead particles contribute nothing to pairings
  BumpFunction f(0.0, 1e7);
  CHECK(pairing(after, f) == 0.0);
}

TEST_CASE("dual semigroup law holds on alive runs", "[particles]") {
  ParticleCloud cloud = sample_cloud(kBumpDensity, -2.0, 2.0, 300);
  auto b = VectorField::parse(1, {"0.1 * x1 * x1 * x1 - x1"});
  const double t = 0.4, s = 0.3;
  ParticleCloud direct = pushforward(cloud, b, t + s);
  ParticleCloud staged = pushforward(pushforward(cloud, b, t), b, s);
  REQUIRE(direct.alive_count() == cloud.size());
  REQUIRE(staged.alive_count() == cloud.size());
  const double tol = 1e-6 * cloud.total_abs_weight();
  BumpFunction f(0.0, 1.5);
  CHECK(std::abs(pairing(direct, f) - pairing(staged, f)) <= tol);
  BumpFunction g(-0.4, 0.8);
  CHECK(std::abs(pairing(direct, g) - pairing(staged, g)) <= tol);
}

TEST_CASE("weak identity holds for the linear contraction", "[particles]") {
  ParticleCloud cloud = sample_cloud(kBumpDensity, -2.0, 2.0, 500);
  auto b = VectorField::parse(1, {"0 - x1"});
  BumpFunction f(0.0, 2.0);
  WeakIdentityReport rep = weak_residual(b, cloud, f, 1.0, 64);
  CHECK(rep.residual <= 1e-5);
  CHECK(rep.n_died == 0);
  REQUIRE(rep.nodes.size() == 65);
  REQUIRE(rep.pairings.size() == 65);
  CHECK(rep.nodes.front() == 0.0);
  CHECK(rep.nodes.back() == 1.0);
  CHECK(rep.weight_scale == cloud.total_abs_weight());
  // lhs really is the pairing difference
  ParticleCloud moved = pushforward(cloud, b, 1.0);
  CHECK(std::abs(rep.lhs - (pairing(moved, f) - pairing(cloud, f))) <= 1e-12);
}

TEST_CASE("weak residual vanishes on disjoint supports", "[particles]") {
  ParticleCloud cloud = sample_cloud(kBumpDensity, -2.0, 2.0, 100);
  auto b = VectorField::parse(1, {"0 - x1"});  // trajectories stay inside [-2, 2]
  BumpFunction f(10.0, 1.0);
  WeakIdentityReport rep = weak_residual(b, cloud, f, 1.0, 16);
  CHECK(rep.residual == 0.0);
  CHECK(rep.lhs == 0.0);
  CHECK(rep.time_integral == 0.0);
}

TEST_CASE("weak identity holds under quadratic growth", "[particles]") {
  ParticleCloud cloud = sample_cloud(kBumpDensity, -1.0, 1.0, 400);
  auto b = VectorField::parse(1, {"1 + x1 * x1"});  // x(t) = tan(atan(x0) + t), alive for t = 0.5
  BumpFunction f(0.5, 2.5);
  WeakIdentityReport rep = weak_residual(b, cloud, f, 0.5, 64);
  CHECK(rep.n_died == 0);
  CHECK(rep.residual <= 1e-4);
  double lhs_oracle = 0.0;
  for (const auto& p : cloud.particles) {
    const double xt = std::tan(std::atan(p.x[0]) + 0.5);
    lhs_oracle += p.weight * (f.value(xt) - f.value(p.x[0]));
  }
  CHECK(std::abs(rep.lhs - lhs_oracle) <= 1e-7);
}

TEST_CASE("weak residual rejects bad arguments", "[particles]") {
  ParticleCloud cloud = sample_cloud("1", -1.0, 1.0, 10);
  auto b = VectorField::parse(1, {"0 - x1"});
  BumpFunction f(0.0, 1.0);
  CHECK_THROWS_AS(weak_residual(b, cloud, f, 1.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(weak_residual(b, cloud, f, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(weak_residual(b, cloud, f, 0.0, 4), std::invalid_argument);
  auto b2 = VectorField::parse(2, {"0 - x1", "0 - x2"});
  CHECK_THROWS_AS(weak_residual(b2, cloud, f, 1.0, 4), std::invalid_argument);
}

TEST_CASE("mass audit conserves mass for a complete flow", "[particles]") {
  ParticleCloud cloud = sample_cloud(kBumpDensity, -2.0, 2.0, 200);
  auto b = VectorField::parse(1, {"0 - x1"});
  const double initial = cloud.total_weight();
  auto rows = mass_audit(b, cloud, {0.2, 0.5, 1.0, 2.0});
  REQUIRE(rows.size() == 4);
  for (const auto& row : rows) {
    CHECK(row.alive_mass == initial);
    CHECK(row.dead_mass == 0.0);
    CHECK(row.n_alive == cloud.size());
    CHECK(row.n_dead == 0);
  }
}

TEST_CASE("mass audit tracks blow-up losses without renormalizing", "[particles]") {
  ParticleCloud cloud = sample_cloud("1", 1.0, 2.0, 128);
  auto b = VectorField::parse(1, {"x1 * x1"});  // death at tau = 1/x0 in [0.5, 1]
  const double initial = cloud.total_weight();
  auto rows = mass_audit(b, cloud, {0.4, 0.6, 0.9});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].alive_mass == initial);  // everyone survives past 0.4
  CHECK(rows[0].n_dead == 0);
  CHECK(rows[1].alive_mass < rows[0].alive_mass);
  CHECK(rows[2].alive_mass < rows[1].alive_mass);
  CHECK(rows[2].n_dead > rows[1].n_dead);
  CHECK(rows[1].n_dead > 0);
  for (const auto& row : rows) {
    CHECK(std::abs(row.alive_mass + row.dead_mass - initial) <= 1e-12 * std::abs(initial));
    CHECK(row.n_alive + row.n_dead == cloud.size());
  }
  // deaths happen between 0.5 and 1.0: nobody is dead at 0.4, everybody by 1.0 + margin
  auto late = mass_audit(b, cloud, {1.05});
  CHECK(late[0].n_alive == 0);
  CHECK(late[0].alive_mass == 0.0);
  CHECK(std::abs(late[0].dead_mass - initial) <= 1e-12 * std::abs(initial));
}

TEST_CASE("mass audit on an empty cloud reports zeros", "[particles]") {
  ParticleCloud cloud;
  auto b = VectorField::parse(1, {"x1"});
  auto rows = mass_audit(b, cloud, {0.5, 1.0});
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    CHECK(row.alive_mass == 0.0);
    CHECK(row.dead_mass == 0.0);
    CHECK(row.n_alive == 0);
    CHECK(row.n_dead == 0);
  }
  BumpFunction f(0.0, 1.0);
  CHECK(pairing(cloud, f) == 0.0);
  WeakIdentityReport rep = weak_residual(b, cloud, f, 1.0, 4);
  CHECK(rep.residual == 0.0);
}

TEST_CASE("mass audit validates its time grid", "[particles]") {
  ParticleCloud cloud = sample_cloud("1", -1.0, 1.0, 4);
  auto b = VectorField::parse(1, {"0 - x1"});
  CHECK_THROWS_AS(mass_audit(b, cloud, {}), std::invalid_argument);
  CHECK_THROWS_AS(mass_audit(b, cloud, {0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(mass_audit(b, cloud, {-0.5, 1.0}), std::invalid_argument);
}

TEST_CASE("independent discretizations agree within their sampling error", "[particles]") {
  ParticleCloud a = sample_cloud(kBumpDensity, -2.0, 2.0, 1000);
  ParticleCloud b = sample_cloud(kBumpDensity, -2.0, 2.0, 1777);
  CHECK(std::abs(a.total_weight() - b.total_weight()) <= 2.0 * (a.riemann_error + b.riemann_error) + 1e-12);

  // jittered variants with different seeds stay close to the midpoint answer
  ParticleCloud ja = sample_cloud(kBumpDensity, -2.0, 2.0, 1000, 7, 0.5);
  ParticleCloud jb = sample_cloud(kBumpDensity, -2.0, 2.0, 1000, 1234, 0.5);
  CHECK(ja.provenance.seed == 7);
  CHECK(std::abs(ja.total_weight() - a.total_weight()) <= 1e-2);
  CHECK(std::abs(jb.total_weight() - a.total_weight()) <= 1e-2);
  // different seeds really move the points
  CHECK(ja.particles[0].x != jb.particles[0].x);
}

TEST_CASE("weak residual shrinks when the time step halves", "[particles]") {
  ParticleCloud cloud = sample_cloud(kBumpDensity, -2.0, 2.0, 500);
  auto b = VectorField::parse(1, {"0 - x1"});
  BumpFunction f(0.0, 2.0);
  WeakIdentityReport coarse = weak_residual(b, cloud, f, 1.0, 8);
  WeakIdentityReport fine = weak_residual(b, cloud, f, 1.0, 16);
  CHECK(fine.residual < coarse.residual);
}
