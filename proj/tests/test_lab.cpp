#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdint>
#include <vector>

#include "semiflow/errors.hpp"
#include "semiflow/lab.hpp"

using semiflow::build_bundle;
using semiflow::extension_divergence;
using semiflow::growth_bound;
using semiflow::KernelReport;
using semiflow::LabScenario;
using semiflow::PerturbationBundle;
using semiflow::random_scenario;
using semiflow::semigroup_uniqueness_probe;
using semiflow::similarity_check;
using semiflow::SingularResolvent;
using semiflow::SmallnessViolation;
using semiflow::validate_scenario;

namespace {

LabScenario fixed_scenario(Eigen::Vector3d u = {0.1, 0.0, 0.0}) {
  LabScenario s;
  s.n = 3;
  s.L = Eigen::Vector3d(-1.0, -2.0, -3.0).asDiagonal();
  s.D_basis = Eigen::MatrixXd::Identity(3, 3).leftCols(2);
  s.phi = Eigen::RowVector3d(0.0, 0.0, 1.0);
  s.u = u;
  s.lambda0 = 1.0;
  return s;
}

PerturbationBundle zero_bundle(const LabScenario& s) {
  PerturbationBundle b;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(s.n, s.n);
  b.R = (s.lambda0 * I - s.L).partialPivLu().solve(I);
  b.C = Eigen::MatrixXd::Zero(s.n, s.n);
  b.Theta = b.C;
  b.U = I;
  b.U_inv_solve = I;
  b.U_inv_neumann = I;
  b.C_tilde = b.C;
  return b;
}

// independent oracle: scaling-and-squaring with a plain Taylor series
Eigen::MatrixXd expm_taylor(const Eigen::MatrixXd& A) {
  const double norm = A.norm();
  int s = 0;
  while (norm / std::pow(2.0, s) > 0.25) ++s;
  const Eigen::MatrixXd B = A / std::pow(2.0, s);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(A.rows(), A.cols());
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 40; ++k) {
    term = term * B / static_cast<double>(k);
    sum += term;
    if (term.norm() < 1e-18 * sum.norm()) break;
  }
  for (int i = 0; i < s; ++i) sum = sum * sum;
  return sum;
}

}  // namespace

TEST_CASE("fixed scenario builds the expected rank-one machinery", "[lab]") {
  LabScenario s = fixed_scenario();
  validate_scenario(s);
  PerturbationBundle b = build_bundle(s);

  CHECK(b.phi_Ru == 0.0);  // (R u) has no third component
  CHECK(b.resolvent_cond == Catch::Approx(2.0).epsilon(1e-12));  // singular values 4 and 2

  // Theta = u (phi R): only the third column is nonzero, and it equals u / 4
  for (int i = 0; i < 3; ++i) {
    CHECK(b.Theta(i, 0) == 0.0);
    CHECK(b.Theta(i, 1) == 0.0);
  }
  CHECK(b.Theta(0, 2) == Catch::Approx(0.025).margin(1e-15));
  CHECK(b.Theta(1, 2) == 0.0);
  CHECK(b.Theta(2, 2) == 0.0);

  // u lies in D and phi(R u) = 0, so Theta^2 = 0 and U^{-1} = I + Theta exactly
  CHECK((b.Theta * b.Theta).norm() == 0.0);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
  CHECK((b.U_inv_solve - (I + b.Theta)).norm() <= 1e-14);
  CHECK((b.U_inv_neumann - (I + b.Theta)).norm() == 0.0);
  CHECK(b.inv_agreement <= 1e-14);
  CHECK((b.U * b.U_inv_solve - I).norm() <= 1e-10);
  CHECK((b.U * b.U_inv_neumann - I).norm() <= 1e-10);
}

TEST_CASE("similarity identity is exact on the fixed scenario", "[lab]") {
  LabScenario s = fixed_scenario();
  PerturbationBundle b = build_bundle(s);
  CHECK(similarity_check(s, b) <= 1e-12);
}

TEST_CASE("zero perturbation has zero defect and zero divergence", "[lab]") {
  LabScenario s = fixed_scenario();
  PerturbationBundle b = zero_bundle(s);
  CHECK(similarity_check(s, b) == 0.0);
  auto rows = extension_divergence(s, b, {0.5, 1.0, 2.0});
  for (const auto& row : rows) {
    CHECK(row.agreement_on_D == 0.0);
    CHECK(row.divergence_off_D == 0.0);
  }
}

TEST_CASE("perturbed semigroup agrees on D and diverges off it", "[lab]") {
  LabScenario s = fixed_scenario();
  PerturbationBundle b = build_bundle(s);
  auto rows = extension_divergence(s, b, {0.0, 1.0});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].divergence_off_D == 0.0);  // t = 0: both are I
  CHECK(rows[1].agreement_on_D <= 1e-14);
  CHECK(rows[1].divergence_off_D > 1e-3);

  // closed form: the only differing entry is (1,3) of the exponential,
  // 0.1 (e^{-t} - e^{-3t}) / 2 at t = 1
  const double oracle = 0.1 * (std::exp(-1.0) - std::exp(-3.0)) / 2.0;
  CHECK(rows[1].divergence_off_D == Catch::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("matrix exponential matches an independent Taylor oracle", "[lab]") {
  LabScenario s = fixed_scenario();
  PerturbationBundle b = build_bundle(s);
  const Eigen::MatrixXd A = s.L + b.C;
  CHECK((A.exp() - expm_taylor(A)).norm() <= 1e-12 * expm_taylor(A).norm());

  semiflow::Rng rng(99);
  Eigen::MatrixXd M(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) M(i, j) = rng.gaussian();
  CHECK((M.exp() - expm_taylor(M)).norm() <= 1e-12 * expm_taylor(M).norm());
}

TEST_CASE("two admissible perturbations give two distinct semigroups", "[lab]") {
  LabScenario s1 = fixed_scenario({0.1, 0.0, 0.0});
  LabScenario s2 = fixed_scenario({0.0, 0.2, 0.0});
  PerturbationBundle b1 = build_bundle(s1);
  PerturbationBundle b2 = build_bundle(s2);
  const Eigen::MatrixXd e1 = (s1.L + b1.C).exp();
  const Eigen::MatrixXd e2 = (s2.L + b2.C).exp();
  CHECK((e1 - e2).norm() > 1e-3);
  // both still agree with the unperturbed generator on D
  auto r1 = extension_divergence(s1, b1, {1.0});
  auto r2 = extension_divergence(s2, b2, {1.0});
  CHECK(r1[0].agreement_on_D <= 1e-14);
  CHECK(r2[0].agreement_on_D <= 1e-14);
  CHECK(r1[0].divergence_off_D > 1e-3);
  CHECK(r2[0].divergence_off_D > 1e-3);
}

TEST_CASE("annihilator of the image of D detects the missing direction", "[lab]") {
  LabScenario s = fixed_scenario();
  PerturbationBundle b = build_bundle(s);
  KernelReport rep = semigroup_uniqueness_probe(s, b, 1.0);
  REQUIRE(rep.dimension == 1);
  CHECK_FALSE(rep.is_core);
  Eigen::VectorXd y = rep.basis.col(0).normalized();
  CHECK(std::abs(y(0)) <= 1e-12);
  CHECK(std::abs(y(1)) <= 1e-12);
  CHECK(std::abs(std::abs(y(2)) - 1.0) <= 1e-12);
  CHECK(rep.residual <= 1e-12);
}

TEST_CASE("full domain is trivially a core", "[lab]") {
  LabScenario s = fixed_scenario();
  s.D_basis = Eigen::MatrixXd::Identity(3, 3);  // bypasses validate on purpose
  PerturbationBundle b = zero_bundle(s);
  KernelReport rep = semigroup_uniqueness_probe(s, b, 1.0);
  CHECK(rep.dimension == 0);
  CHECK(rep.is_core);
}

TEST_CASE("uniqueness probe rejects lambda below the growth bound", "[lab]") {
  LabScenario s = fixed_scenario();
  PerturbationBundle b = build_bundle(s);
  CHECK_THROWS_AS(semigroup_uniqueness_probe(s, b, -2.0), std::invalid_argument);
}

TEST_CASE("scenario validation rejects degenerate inputs", "[lab]") {
  LabScenario s = fixed_scenario();
  s.phi.setZero();
  CHECK_THROWS_AS(validate_scenario(s), std::invalid_argument);

  s = fixed_scenario();
  s.phi = Eigen::RowVector3d(1.0, 0.0, 0.0);  // does not vanish on D
  CHECK_THROWS_AS(validate_scenario(s), std::invalid_argument);

  s = fixed_scenario();
  s.u.setZero();
  CHECK_THROWS_AS(validate_scenario(s), std::invalid_argument);

  s = fixed_scenario();
  s.D_basis = Eigen::MatrixXd::Identity(3, 3);  // k must stay below n
  CHECK_THROWS_AS(validate_scenario(s), std::invalid_argument);
}

TEST_CASE("singular resolvent and smallness violations are reported", "[lab]") {
  LabScenario s = fixed_scenario();
  s.lambda0 = -2.0;  // an eigenvalue of L
  CHECK_THROWS_AS(build_bundle(s), SingularResolvent);

  s = fixed_scenario({0.0, 0.0, 8.0});  // phi(R u) = 8 / 4 = 2
  try {
    build_bundle(s);
    FAIL("expected SmallnessViolation");
  } catch (const SmallnessViolation& e) {
    CHECK(e.value == Catch::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("growth bound is the largest real eigenvalue part", "[lab]") {
  LabScenario s = fixed_scenario();
  CHECK(growth_bound(s.L) == Catch::Approx(-1.0).margin(1e-12));
}

TEST_CASE("seeded scenarios satisfy the Neumann and power-law identities", "[lab]") {
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const int n = 2 + static_cast<int>(seed % 7);       // 2..8
    const int k = 1 + static_cast<int>(seed % (n - 1));  // 1..n-1
    const double target = 0.05 + 0.45 * static_cast<double>(seed % 10) / 9.0;  // <= 0.5
    LabScenario s = random_scenario(n, k, seed, target);
    validate_scenario(s);
    PerturbationBundle b = build_bundle(s);
    REQUIRE(std::abs(b.phi_Ru) == Catch::Approx(target).epsilon(1e-9));

    // Neumann closed form vs direct solve
    REQUIRE(b.inv_agreement <= 1e-10);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    REQUIRE((b.U * b.U_inv_solve - I).norm() <= 1e-10);

    // Theta^m x = phi(R x) phi(R u)^{m-1} u for m = 2, 3, 4
    semiflow::Rng rng(seed * 7919 + 13);
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x(i) = rng.gaussian();
    const double phi_Rx = (s.phi * b.R * x).value();
    const double theta_norm = b.Theta.norm();
    Eigen::MatrixXd power = b.Theta * b.Theta;
    for (int m = 2; m <= 4; ++m) {
      const Eigen::VectorXd closed = phi_Rx * std::pow(b.phi_Ru, m - 1) * s.u;
      const Eigen::VectorXd direct = power * x;
      // forward-error scale of the repeated product, not just the result size
      const double scale = 1.0 + std::pow(theta_norm, m) * x.norm() + closed.norm();
      REQUIRE((direct - closed).norm() <= 1e-12 * scale);
      power = power * b.Theta;
    }
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("similarity defect stays small even near the smallness boundary", "[lab]") {
  for (std::uint64_t seed : {11u, 42u, 1234u, 90210u}) {
    LabScenario s = random_scenario(8, 4, seed, 0.9);
    PerturbationBundle b = build_bundle(s);
    CHECK(std::abs(b.phi_Ru) == Catch::Approx(0.9).epsilon(1e-9));
    CHECK(similarity_check(s, b) <= 1e-9);
  }
}

TEST_CASE("annihilator dimension equals the codimension of D", "[lab]") {
  for (std::uint64_t seed = 200; seed < 240; ++seed) {
    const int n = 3 + static_cast<int>(seed % 6);  // 3..8
    const int k = 1 + static_cast<int>((seed / 7) % (n - 1));
    LabScenario s = random_scenario(n, k, seed, 0.4);
    PerturbationBundle b = build_bundle(s);
    const double lambda = 1.0 + std::max(growth_bound(s.L), growth_bound(s.L + b.C));
    KernelReport rep = semigroup_uniqueness_probe(s, b, lambda);
    REQUIRE(rep.dimension == n - k);
    CHECK_FALSE(rep.is_core);
    CHECK(rep.residual <= 1e-9);
  }
}

TEST_CASE("non-core domains always admit visibly distinct extensions", "[lab]") {
  for (std::uint64_t seed : {5u, 17u, 256u}) {
    LabScenario s = random_scenario(6, 3, seed, 0.35);
    PerturbationBundle b = build_bundle(s);
    auto rows = extension_divergence(s, b, {0.25, 0.5, 1.0, 2.0});
    double max_div = 0.0;
    for (const auto& row : rows) {
      CHECK(row.agreement_on_D <= 1e-12);
      max_div = std::max(max_div, row.divergence_off_D);
    }
    CHECK(max_div > 0.0);
  }
}
