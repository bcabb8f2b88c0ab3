// Certifies the radial comparison inequality h(|X_t(x)|) >= h(|x|) - t for a
// planar contraction, where h(r) is the travel time from the inner radius to
// r under rdot = beta(r). Then shows the same machinery rejecting a speed
// bound that a superlinear pull genuinely breaks.

#include <cstdio>

#include "semiflow/escape.hpp"

using namespace semiflow;

int main() {
  RadialBound bound = RadialBound::parse("r", 1.0);
  EscapeOptions opts;
  opts.n_directions = 16;

  std::printf("speed bound: |b(x)| <= beta(|x|) = |x| outside the unit disc\n");
  std::printf("ladder:      h(r) = time to climb from radius 1 to r at speed beta\n");
  std::printf("claim:       h(|X_t(x)|) >= h(|x|) - t  (no shortcut down the ladder)\n\n");

  {
    VectorField b = VectorField::parse(2, {"-x1", "-x2"});
    EscapeCertificate cert = escape_certificate(b, bound, {2.0, 4.0, 8.0}, 3.0, opts);
    std::printf("b = -x:  certified over %zu sampled states\n", cert.checked.size());
    std::printf("  integral of 1/beta to infinity: %s (escape to infinity takes forever)\n",
                to_string(cert.tail.kind));
    std::printf("  worst margin h(|X_t|) - (h(|x|) - t): %.3e  (|b| = beta: equality case)\n",
                cert.min_margin);
    std::printf("  smallest final radius by start radius:");
    for (const auto& row : cert.trend)
      std::printf("  %g -> %.4g", row.start_radius, row.min_final_radius);
    std::printf("\n\n");
  }

  {
    VectorField b = VectorField::parse(2, {"-x1 * sqrt(x1^2 + x2^2)", "-x2 * sqrt(x1^2 + x2^2)"});
    std::printf("b = -|x| x  against the same linear bound (true speed r^2 > r):\n");
    try {
      escape_certificate(b, bound, {2.0}, 3.0, opts);
      std::printf("  unexpectedly certified\n");
      return 1;
    } catch (const CertificateFailure& cf) {
      std::printf("  rejected with %zu violations, worst first:\n", cf.violations.size());
      std::size_t shown = 0;
      for (const auto& v : cf.violations) {
        std::printf("    start radius %g, direction %d, t = %.4f, margin %.3e\n",
                    v.start_radius, v.direction, v.t, v.margin);
        if (++shown == 3) break;
      }
    }
  }
  return 0;
}
