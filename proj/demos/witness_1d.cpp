// Runs the one-dimensional uniqueness analyzer on a few drifts and prints
// what it decides, plus the decaying flux profile when a witness exists.

#include <cmath>
#include <cstdio>

#include "semiflow/uniqueness.hpp"

using namespace semiflow;

namespace {

void show(const char* src, const UniquenessReport& rep) {
  std::printf("b(x) = %-14s -> %s", src, to_string(rep.verdict));
  if (rep.left_tail && rep.right_tail)
    std::printf("   (tails: %s / %s)", to_string(rep.left_tail->kind),
                to_string(rep.right_tail->kind));
  std::printf("\n");
  if (rep.witness) {
    const Witness& w = *rep.witness;
    std::printf("  witness at lambda = %g, base c = %g, ||h||_L1 = %.12g (err %.2g)\n",
                w.lambda(), w.base_point(), w.l1_norm, w.l1_abs_err);
    std::printf("  %10s %14s %14s\n", "x", "h(x)", "b(x) h(x)");
    for (double x : {-8.0, -4.0, -2.0, 0.0, 2.0, 4.0, 8.0}) {
      // u(x) has a log singularity at a finite support edge; stay clear of it
      double lo = w.support_lo(), hi = w.support_hi();
      if (std::isfinite(lo) && x < lo + 1e-6 * (1.0 + std::abs(lo))) continue;
      if (std::isfinite(hi) && x > hi - 1e-6 * (1.0 + std::abs(hi))) continue;
      std::printf("  %10.3f %14.6e %14.6e\n", x, w.h(x), w.flux(x));
    }
  }
  if (rep.residual)
    std::printf("  max normalized pairing residual over %zu bumps: %.3e\n",
                rep.residual->bumps.size(), rep.residual->max_normalized);
  if (!rep.blowup_partials.empty())
    std::printf("  witness mass by cutoff %g: %.3e (unbounded -> no integrable witness)\n",
                rep.blowup_partials.back().cutoff, rep.blowup_partials.back().partial);
  for (const auto& note : rep.notes) std::printf("  note: %s\n", note.c_str());
  std::printf("\n");
}

}  // namespace

int main() {
  std::printf("does  d/dt rho = -(b rho)'  have exactly one mass-preserving solution?\n\n");

  for (const char* src : {"1 + x^2", "1", "exp(x)"}) {
    VectorField b = VectorField::parse(1, {src});
    show(src, analyze_positive_b(b));
  }

  // sign-changing drift on a window: witness lives left of the first zero
  {
    const char* src = "x * (x - 1)";
    VectorField b = VectorField::parse(1, {src});
    UniquenessReport rep = analyze_general_b(b, -1.0, 2.0);
    show(src, rep);
    if (rep.witness && !rep.witness->glue_probes.empty()) {
      std::printf("  flux toward the gluing point x1 = %g:\n", rep.witness->glue_boundary);
      for (const auto& p : rep.witness->glue_probes)
        std::printf("    eps = %8.1e   |b h|(x1 -/+ eps) = %.3e\n", p.epsilon, p.flux);
    }
  }

  // closed form for b = 1 + x^2: ||h||_L1 = e^{pi/2} - e^{-pi/2}
  double oracle = 2.0 * std::sinh(std::acos(-1.0) / 2.0);
  std::printf("closed-form check for b = 1 + x^2: expected L1 mass %.12g\n", oracle);
  return 0;
}
