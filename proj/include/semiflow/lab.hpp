#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "semiflow/errors.hpp"
#include "semiflow/rng.hpp"

namespace semiflow {

/// Dense-matrix model of a rank-one generator perturbation that vanishes on a
/// subspace D: L is the generator, D_basis spans D, phi is a covector with
/// phi . d = 0 on D, and C = u . phi perturbs L without moving it on D.
struct LabScenario {
  int n = 0;
  Eigen::MatrixXd L;        ///< n x n
  Eigen::MatrixXd D_basis;  ///< n x k, k < n columns spanning D
  Eigen::RowVectorXd phi;   ///< 1 x n, annihilates D
  Eigen::VectorXd u;        ///< n, nonzero
  double lambda0 = 1.0;     ///< must lie in the resolvent set of L
};

struct PerturbationBundle {
  Eigen::MatrixXd R;              ///< resolvent (lambda0 I - L)^{-1}
  Eigen::MatrixXd C;              ///< u . phi, rank one
  Eigen::MatrixXd Theta;          ///< C R
  Eigen::MatrixXd U;              ///< I - Theta
  Eigen::MatrixXd U_inv_solve;    ///< U^{-1} by direct linear solve
  Eigen::MatrixXd U_inv_neumann;  ///< U^{-1} by the closed rank-one form
  Eigen::MatrixXd C_tilde;        ///< (lambda0 I - L) C R
  double phi_Ru = 0.0;
  double resolvent_cond = 0.0;    ///< condition number of lambda0 I - L
  double inv_agreement = 0.0;     ///< relative gap between the two inverses
};

inline double growth_bound(const Eigen::MatrixXd& A) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
  return es.eigenvalues().real().maxCoeff();
}

/// Checks the scenario invariants: shapes, phi|_D = 0, nonzero phi and u, and
/// an invertible lambda0 I - L. Throws on violation.
inline void validate_scenario(const LabScenario& s) {
  if (s.n < 1) throw std::invalid_argument("lab scenario: dimension must be >= 1");
  if (s.L.rows() != s.n || s.L.cols() != s.n) throw std::invalid_argument("lab scenario: L must be n x n");
  const auto k = s.D_basis.cols();
  if (s.D_basis.rows() != s.n || k < 1 || k >= s.n)
    throw std::invalid_argument("lab scenario: D_basis must be n x k with 0 < k < n");
  if (s.phi.cols() != s.n) throw std::invalid_argument("lab scenario: phi must have n entries");
  if (s.u.size() != s.n) throw std::invalid_argument("lab scenario: u must have n entries");
  const double phi_norm = s.phi.norm(), d_norm = s.D_basis.norm();
  if (phi_norm == 0.0) throw std::invalid_argument("lab scenario: phi must be nonzero");
  if (s.u.norm() == 0.0) throw std::invalid_argument("lab scenario: u must be nonzero");
  if ((s.phi * s.D_basis).norm() > 1e-12 * phi_norm * d_norm)
    throw std::invalid_argument("lab scenario: phi does not vanish on D");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(s.lambda0 * Eigen::MatrixXd::Identity(s.n, s.n) - s.L);
  const double smin = svd.singularValues().minCoeff(), smax = svd.singularValues().maxCoeff();
  if (!(smin > smax * 1e-14)) throw SingularResolvent(s.lambda0, smax > 0.0 ? smin / smax : 0.0);
}

/// Builds the perturbation machinery: resolvent R, rank-one C = u phi,
/// Theta = C R, U = I - Theta, both U^{-1} computations, and
/// C_tilde = (lambda0 I - L) C R. The closed inverse is
/// U^{-1} x = x + phi(R x) / (1 - phi(R u)) u, valid because
/// Theta^n x = phi(R x) phi(R u)^{n-1} u geometrically sums.
inline PerturbationBundle build_bundle(const LabScenario& s) {
  validate_scenario(s);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(s.n, s.n);
  const Eigen::MatrixXd A = s.lambda0 * I - s.L;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const double smin = svd.singularValues().minCoeff(), smax = svd.singularValues().maxCoeff();
  if (!(smin > smax * 1e-14)) throw SingularResolvent(s.lambda0, smax > 0.0 ? smin / smax : 0.0);

  PerturbationBundle b;
  b.resolvent_cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  b.R = A.partialPivLu().solve(I);
  b.C = s.u * s.phi;
  b.Theta = b.C * b.R;
  b.U = I - b.Theta;
  b.phi_Ru = (s.phi * b.R * s.u).value();
  if (!(std::abs(b.phi_Ru) < 1.0)) throw SmallnessViolation(std::abs(b.phi_Ru));
  b.U_inv_solve = b.U.partialPivLu().solve(I);
  b.U_inv_neumann = I + (s.u * (s.phi * b.R)) / (1.0 - b.phi_Ru);
  b.C_tilde = A * b.C * b.R;
  b.inv_agreement = (b.U_inv_solve - b.U_inv_neumann).norm() / b.U_inv_neumann.norm();
  return b;
}

/// Relative Frobenius defect of the exact conjugation identity
/// U (L + C_tilde) U^{-1} = L + C.
inline double similarity_check(const LabScenario& s, const PerturbationBundle& b) {
  const Eigen::MatrixXd lhs = b.U * (s.L + b.C_tilde) * b.U_inv_solve;
  const Eigen::MatrixXd rhs = s.L + b.C;
  const double scale = rhs.norm();
  return scale > 0.0 ? (lhs - rhs).norm() / scale : (lhs - rhs).norm();
}

struct ExtensionRow {
  double t = 0.0;
  double agreement_on_D = 0.0;    ///< max over D-basis columns of ||(L+C)d - Ld||
  double divergence_off_D = 0.0;  ///< ||e^{t(L+C)} - e^{tL}||_F
};

/// Tabulates how the two semigroups generated by L and L + C relate: they
/// agree on D (C kills D) yet drift apart in norm once C != 0. Exponentials
/// use scaling-and-squaring with the order-13 diagonal Pade approximant.
inline std::vector<ExtensionRow> extension_divergence(const LabScenario& s, const PerturbationBundle& b,
                                                      const std::vector<double>& t_grid) {
  double agree = 0.0;
  for (Eigen::Index j = 0; j < s.D_basis.cols(); ++j)
    agree = std::max(agree, (b.C * s.D_basis.col(j)).norm());
  std::vector<ExtensionRow> rows;
  rows.reserve(t_grid.size());
  for (double t : t_grid) {
    ExtensionRow row;
    row.t = t;
    row.agreement_on_D = agree;
    const Eigen::MatrixXd e0 = (t * s.L).exp();
    const Eigen::MatrixXd e1 = (t * (s.L + b.C)).exp();
    row.divergence_off_D = (e1 - e0).norm();
    rows.push_back(row);
  }
  return rows;
}

struct KernelReport {
  double lambda = 0.0;
  int dimension = 0;          ///< dim of the annihilator of (lambda I - L)(D)
  bool is_core = false;       ///< true iff the annihilator is trivial
  Eigen::MatrixXd basis;      ///< n x dimension, columns spanning the annihilator
  double residual = 0.0;      ///< max |y . (lambda I - L) d| over basis pairs
};

/// Computes a basis of { y : y perp (lambda I - L)(D) }. A nonzero annihilator
/// certifies that D is not a core: the restriction of L to D leaves room for
/// distinct generator extensions, which extension_divergence then exhibits.
inline KernelReport semigroup_uniqueness_probe(const LabScenario& s, const PerturbationBundle& b,
                                               double lambda) {
  const double bound = std::max(growth_bound(s.L), growth_bound(s.L + b.C));
  if (!(lambda > bound))
    throw std::invalid_argument("uniqueness probe: lambda must exceed the growth bound " + std::to_string(bound));
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(s.n, s.n);
  const Eigen::MatrixXd image = (lambda * I - s.L) * s.D_basis;  // n x k
  Eigen::FullPivLU<Eigen::MatrixXd> lu(image.transpose());
  lu.setThreshold(1e-10);
  KernelReport rep;
  rep.lambda = lambda;
  rep.basis = lu.kernel();  // n x (n - rank)
  // FullPivLU::kernel() returns a single zero column for a trivial kernel
  if (rep.basis.cols() == 1 && rep.basis.norm() == 0.0) rep.basis.resize(s.n, 0);
  rep.dimension = static_cast<int>(rep.basis.cols());
  rep.is_core = rep.dimension == 0;
  for (Eigen::Index j = 0; j < rep.basis.cols(); ++j)
    rep.residual = std::max(rep.residual, (rep.basis.col(j).transpose() * image).cwiseAbs().maxCoeff());
  return rep;
}

/// Seeded random scenario: Gaussian L scaled to moderate norm, orthonormal
/// D_basis from the QR of a Gaussian n x k matrix, phi taken from the
/// orthogonal complement projector, lambda0 = 1 + growth bound, and u scaled
/// so that |phi(R u)| hits `target_phi_Ru`.
inline LabScenario random_scenario(int n, int k, std::uint64_t seed, double target_phi_Ru = 0.3) {
  if (n < 2 || k < 1 || k >= n) throw std::invalid_argument("random_scenario: need n >= 2 and 0 < k < n");
  if (!(target_phi_Ru > 0.0 && target_phi_Ru < 1.0))
    throw std::invalid_argument("random_scenario: target |phi(R u)| must lie in (0, 1)");
  Rng rng(seed);
  auto gaussian_matrix = [&](int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
    return m;
  };

  LabScenario s;
  s.n = n;
  s.L = gaussian_matrix(n, n) / std::sqrt(static_cast<double>(n));

  const Eigen::MatrixXd G = gaussian_matrix(n, k);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  s.D_basis = Eigen::MatrixXd(qr.householderQ()) * Eigen::MatrixXd::Identity(n, k);

  const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n) - s.D_basis * s.D_basis.transpose();
  s.phi = P.row(n - 1);
  for (int row = n - 1; s.phi.norm() < 1e-8 && row > 0; --row) s.phi = P.row(row - 1);
  s.phi /= s.phi.norm();

  s.lambda0 = 1.0 + growth_bound(s.L);
  const Eigen::MatrixXd A = s.lambda0 * Eigen::MatrixXd::Identity(n, n) - s.L;
  const auto solver = A.partialPivLu();
  for (int attempt = 0; attempt < 16; ++attempt) {
    Eigen::VectorXd g = gaussian_matrix(n, 1);
    const double a = (s.phi * solver.solve(g)).value();
    if (std::abs(a) > 1e-10) {
      s.u = g * (target_phi_Ru / std::abs(a));
      return s;
    }
  }
  throw std::runtime_error("random_scenario: could not reach the requested |phi(R u)|");
}

}  // namespace semiflow
