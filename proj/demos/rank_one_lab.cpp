// Finite-dimensional sandbox for rank-one generator perturbations: builds
// L + u phi from a scenario, checks the resolvent algebra, and shows how two
// admissible extensions agree on the designated subspace while drifting
// apart off it.

#include <cstdio>

#include "semiflow/lab.hpp"

using namespace semiflow;

namespace {

void print_rows(const std::vector<ExtensionRow>& rows) {
  std::printf("  %6s %18s %18s\n", "t", "agreement on D", "divergence off D");
  for (const auto& r : rows)
    std::printf("  %6.2f %18.3e %18.3e\n", r.t, r.agreement_on_D, r.divergence_off_D);
}

}  // namespace

int main() {
  LabScenario s;
  s.n = 3;
  s.L = Eigen::Vector3d(-1.0, -2.0, -3.0).asDiagonal();
  s.D_basis = Eigen::MatrixXd::Identity(3, 3).leftCols(2);
  s.phi = Eigen::RowVector3d(0.0, 0.0, 1.0);
  s.u = Eigen::Vector3d(0.1, 0.0, 0.0);
  s.lambda0 = 1.0;
  validate_scenario(s);

  PerturbationBundle b = build_bundle(s);
  std::printf("diagonal L with a rank-one kick u phi, phi annihilating D = span(e1, e2)\n\n");
  std::printf("phi(R u)             = %.6g  (|.| < 1 keeps the Neumann series honest)\n", b.phi_Ru);
  std::printf("Neumann vs direct solve for (I - R u phi)^{-1}: %.3e\n", b.inv_agreement);
  std::printf("similarity defect of the resolvent identity:    %.3e\n\n", similarity_check(s, b));

  std::vector<double> grid{0.25, 0.5, 1.0, 2.0};
  std::printf("semigroups of L and L + u phi:\n");
  print_rows(extension_divergence(s, b, grid));

  LabScenario s2 = s;
  s2.u = -s.u;
  PerturbationBundle b2 = build_bundle(s2);
  std::printf("\nsame data with u replaced by -u (still admissible):\n");
  print_rows(extension_divergence(s2, b2, grid));

  Eigen::MatrixXd gap = ((s.L + b.C) * 1.0).exp() - ((s2.L + b2.C) * 1.0).exp();
  std::printf("\n|| e^{L + u phi} - e^{L - u phi} || at t = 1: %.6g\n", gap.norm());
  std::printf("distinct admissible kicks, distinct semigroups, identical action on D\n\n");

  double lambda = 1.0 + std::max(growth_bound(s.L), growth_bound(s.L + b.C));
  KernelReport kr = semigroup_uniqueness_probe(s, b, lambda);
  std::printf("functionals annihilating (lambda - L) D at lambda = %g: dimension %d (n - k = %d)\n",
              lambda, kr.dimension, s.n - static_cast<int>(s.D_basis.cols()));
  std::printf("nonzero dimension is exactly the room the two extensions above live in;\n");
  std::printf("probe residual %.3e, D is %sa core for the probe\n", kr.residual,
              kr.is_core ? "" : "not ");
  return 0;
}
