#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace semiflow {

/// Small deterministic generator (splitmix64 core). Chosen over the
/// standard-library engines so that streams are identical across platforms
/// and standard-library versions; reports depend on that.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via Box-Muller (hand-rolled: std::normal_distribution
  /// is not bit-stable across implementations).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double m = std::sqrt(-2.0 * std::log(u1));
    spare_ = m * std::sin(2.0 * std::numbers::pi * u2);
    have_spare_ = true;
    return m * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// m unit directions in R^d, deterministic given the seed. d = 1 alternates
/// +1/-1; d = 2 uses a seeded golden-angle sequence; d = 3 a seeded Fibonacci
/// sphere; higher dimensions fall back to normalized Gaussian samples.
inline std::vector<std::vector<double>> sphere_directions(int d, int m, std::uint64_t seed) {
  using std::numbers::pi;
  Rng rng(seed);
  std::vector<std::vector<double>> dirs;
  dirs.reserve(static_cast<std::size_t>(m));
  if (d == 1) {
    for (int i = 0; i < m; ++i) dirs.push_back({i % 2 == 0 ? 1.0 : -1.0});
    return dirs;
  }
  if (d == 2) {
    const double offset = rng.uniform();
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int i = 0; i < m; ++i) {
      double frac = std::fmod(offset + golden * i, 1.0);
      double theta = 2.0 * pi * frac;
      dirs.push_back({std::cos(theta), std::sin(theta)});
    }
    return dirs;
  }
  if (d == 3) {
    const double offset = rng.uniform();
    const double golden_angle = pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < m; ++i) {
      double z = 1.0 - (2.0 * i + 1.0) / m;
      double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
      double theta = golden_angle * i + 2.0 * pi * offset;
      dirs.push_back({rad * std::cos(theta), rad * std::sin(theta), z});
    }
    return dirs;
  }
  for (int i = 0; i < m; ++i) {
    std::vector<double> v(static_cast<std::size_t>(d));
    double norm = 0.0;
    while (norm == 0.0) {
      for (auto& c : v) c = rng.gaussian();
      norm = 0.0;
      for (double c : v) norm += c * c;
      norm = std::sqrt(norm);
    }
    for (auto& c : v) c /= norm;
    dirs.push_back(std::move(v));
  }
  return dirs;
}

}  // namespace semiflow
